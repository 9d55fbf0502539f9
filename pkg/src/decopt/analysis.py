"""Error metrics, theory-verification quantities and communication accounting.

Norms are Euclidean on the stacked ``np``-vector, i.e. Frobenius norms of the
``(n, p)`` blocks.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .problems import ProblemOracle

TRACE_COLUMNS = (
    "iter",
    "comm_volume",
    "optimality_error",
    "relative_error",
    "consensus_error",
    "tracking_error",
    "potential",
    "objective_gap",
    "wall_s",
)


def _Wmat(W) -> np.ndarray:
    return np.asarray(getattr(W, "W", W), dtype=float)


def deviation(X: np.ndarray) -> np.ndarray:
    """``X - M X``: each row minus the row average."""
    return X - X.mean(axis=0, keepdims=True)


def consensus_error(X: np.ndarray) -> float:
    return float(np.linalg.norm(deviation(X)))


def optimality_error(X: np.ndarray, oracle: ProblemOracle, G: np.ndarray | None = None) -> float:
    """``||mean_i grad f_i(x_i)|| + ||x - Mx||``.

    ``G`` may carry precomputed local gradients at ``X``.
    """
    if G is None:
        G = oracle.gradients(X)
    return float(np.linalg.norm(G.mean(axis=0))) + consensus_error(X)


def relative_error(X: np.ndarray, z_star: np.ndarray) -> float:
    z_star = np.asarray(z_star, dtype=float)
    per_node = np.linalg.norm(X - z_star, axis=1)
    return float(per_node.mean() / (np.linalg.norm(z_star) + 1.0))


def potential(X: np.ndarray, V: np.ndarray, alpha: float, oracle: ProblemOracle, W) -> float:
    """NDCG Lyapunov function: objective at the average plus three penalty terms."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    W = _Wmat(W)
    n = X.shape[0]
    x_bar = X.mean(axis=0)
    lap = float(np.sum(X * (X - W @ X)))
    return (
        oracle.global_value(x_bar)
        + lap / (2.0 * alpha * n)
        + consensus_error(X) ** 2
        + consensus_error(V) ** 2
    )


def error_vector(X: np.ndarray, V: np.ndarray, oracle: ProblemOracle, z_star, F_star: float | None = None) -> np.ndarray:
    """``[||x - Mx||^2, n (F(x_bar) - F(z*)), ||v - Mv||^2]``."""
    n = X.shape[0]
    if F_star is None:
        F_star = oracle.global_value(z_star)
    gap = oracle.global_value(X.mean(axis=0)) - F_star
    return np.array([consensus_error(X) ** 2, n * gap, consensus_error(V) ** 2])


@dataclass(frozen=True)
class ContractionSpec:
    J: np.ndarray
    rho: float
    alpha: float
    L: float
    mu: float
    sigma: float
    psi: float
    Psi: float

    @property
    def kappa_g(self) -> float:
        return 1.0 / (1.0 - self.sigma**2)

    @property
    def kappa_f(self) -> float:
        return self.L / self.mu

    @property
    def kappa_H(self) -> float:
        return self.Psi / self.psi

    def rho_bound(self) -> float:
        """Guaranteed spectral radius when ``alpha`` respects the DMBFGS stepsize bound."""
        s2 = self.sigma**2
        if self.sigma == 0:
            return 1.0 - 1.0 / (225.0 * self.kappa_H**2 * self.kappa_f)
        return 1.0 - (1.0 - s2) ** 2 / (3916.0 * self.kappa_f**2 * self.kappa_H**2)


def contraction_matrix(alpha: float, L: float, mu: float, sigma: float, psi: float, Psi: float) -> ContractionSpec:
    """3x3 matrix bounding one DMBFGS round of the error vector."""
    if not (alpha >= 0 and L > 0 and mu > 0 and psi > 0 and Psi > 0 and 0 <= sigma < 1):
        raise ValueError("invalid contraction parameters")
    s2 = sigma * sigma
    g = 1.0 - s2
    a2 = alpha * alpha
    P2 = Psi * Psi
    diag_mix = (1.0 + s2) / 2.0
    J = np.empty((3, 3))
    J[0, 0] = diag_mix + 6.0 * s2 * P2 * a2 * L * L / g
    J[0, 1] = 12.0 * s2 * P2 * a2 * L / g
    J[0, 2] = 6.0 * s2 * P2 * a2 / g
    J[1, 0] = alpha * L * L * P2 / psi + 1.5 * L**3 * P2 * a2
    J[1, 1] = 1.0 - (psi * alpha - 3.0 * a2 * L * P2) * mu
    J[1, 2] = alpha * P2 / psi + 1.5 * L * P2 * a2
    J[2, 0] = 2.0 * L * L * s2 / g * (8.0 + 6.0 * a2 * L * L * P2)
    J[2, 1] = 24.0 * a2 * L**3 * P2 * s2 / g
    J[2, 2] = 12.0 * a2 * L * L * P2 * s2 / g + diag_mix
    rho = float(np.max(np.abs(np.linalg.eigvals(J))))
    return ContractionSpec(J=J, rho=rho, alpha=alpha, L=L, mu=mu, sigma=sigma, psi=psi, Psi=Psi)


@dataclass
class ContractionReport:
    fraction: float
    rounds: int
    violations: list[int]
    decay: np.ndarray

    @property
    def mean_decay(self) -> float:
        finite = self.decay[np.isfinite(self.decay)]
        return float(np.exp(np.mean(np.log(finite)))) if finite.size else float("nan")


def check_contraction(us: Sequence[np.ndarray], J, atol: float = 1e-9, rtol: float = 1e-9) -> ContractionReport:
    """Fraction of rounds with ``u^{t+1} <= J u^t`` componentwise, plus per-round ``||u||`` ratios."""
    us = np.asarray(us, dtype=float)
    if us.shape[0] < 2:
        raise ValueError("need at least two error vectors")
    J = np.asarray(getattr(J, "J", J), dtype=float)
    bound = us[:-1] @ J.T
    ok = np.all(us[1:] <= bound + atol + rtol * np.abs(bound), axis=1)
    norms = np.linalg.norm(us, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        decay = np.where(norms[:-1] > 0, norms[1:] / norms[:-1], np.nan)
    return ContractionReport(
        fraction=float(ok.mean()),
        rounds=int(ok.size),
        violations=[int(k) for k in np.flatnonzero(~ok)],
        decay=decay,
    )


def communication_volume(iterations: int, rounds_per_iteration: int, edge_count: int, p: int) -> int:
    for v in (iterations, rounds_per_iteration, edge_count, p):
        if int(v) != v or v < 0:
            raise ValueError("communication volume factors must be nonnegative integers")
    return int(iterations) * int(rounds_per_iteration) * int(edge_count) * int(p)


def xi_limit(L: float, alpha: float) -> float:
    return 2.0 / (1.0 + math.sqrt(1.0 - 4.0 * L * alpha))


def xi_sequence(L: float, alpha: float, T: int) -> tuple[np.ndarray, float]:
    """``xi^0 = 1``, ``xi^{t+1} = 1 + L alpha (xi^t)^2`` for ``t < T``, with its limit bound ``c``."""
    if not (L > 0 and alpha > 0):
        raise ValueError("need L > 0 and alpha > 0")
    if L * alpha > 0.25:
        raise ValueError(f"need alpha <= 1/(4L); got L*alpha = {L * alpha}")
    c = xi_limit(L, alpha)
    xi = np.empty(T + 1)
    xi[0] = 1.0
    for t in range(T):
        xi[t + 1] = 1.0 + L * alpha * xi[t] ** 2
    # xi approaches c from below; rounding near the fixed point can overshoot by an ulp
    if not (np.all(xi >= 1.0) and np.all(xi <= c * (1.0 + 1e-12)) and c <= 2.0):
        raise AssertionError("xi sequence left [1, c]")
    return xi, c


def tracking_deviation(V: np.ndarray, G: np.ndarray) -> float:
    """``||mean(v) - mean(g)|| / (1 + ||g||)``; zero in exact arithmetic for tracker methods."""
    return float(np.linalg.norm(V.mean(axis=0) - G.mean(axis=0)) / (1.0 + np.linalg.norm(G)))


def cone_violation(v_tilde: np.ndarray, d: np.ndarray, xi: float) -> float:
    """Largest normalized violation of the NDCG descent-cone inequalities over all nodes.

    Checks ``(2 - xi)|v|^2 <= -v.d <= xi |v|^2`` and
    ``(2 - xi)|v| <= |d| <= xi |v|`` row by row. Each violation is divided by
    ``max(1, rhs)``; a value <= 0 means every inequality holds.
    """
    vv = np.einsum("ij,ij->i", v_tilde, v_tilde)
    descent = -np.einsum("ij,ij->i", v_tilde, d)
    nv = np.sqrt(vv)
    nd = np.linalg.norm(d, axis=1)
    pairs = (
        ((2.0 - xi) * vv, descent),
        (descent, xi * vv),
        ((2.0 - xi) * nv, nd),
        (nd, xi * nv),
    )
    worst = -np.inf
    for lhs, rhs in pairs:
        worst = max(worst, float(np.max((lhs - rhs) / np.maximum(1.0, np.abs(rhs)))))
    return worst


@dataclass
class MetricTrace:
    """Per-iteration metric rows; ``None`` marks a quantity that was not computed."""

    rows: list[dict] = field(default_factory=list)
    diverged_at: int | None = None

    def append(self, **row) -> None:
        if self.rows and row["iter"] <= self.rows[-1]["iter"]:
            raise ValueError("iteration index must increase")
        if self.rows and row["comm_volume"] < self.rows[-1]["comm_volume"]:
            raise ValueError("communication volume must not decrease")
        self.rows.append({k: row.get(k) for k in TRACE_COLUMNS})

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if r[name] is None else r[name] for r in self.rows], dtype=float)

    @property
    def last(self) -> dict:
        return self.rows[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for r in self.rows:
            writer.writerow(["" if r[k] is None else (repr(float(r[k])) if isinstance(r[k], float) else r[k]) for k in TRACE_COLUMNS])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read_csv(cls, path) -> "MetricTrace":
        trace = cls()
        with open(path, encoding="utf-8", newline="") as fh:
            for rec in csv.DictReader(fh):
                row = {}
                for k in TRACE_COLUMNS:
                    val = rec.get(k, "")
                    if val == "":
                        row[k] = None
                    elif k in ("iter", "comm_volume"):
                        row[k] = int(val)
                    else:
                        row[k] = float(val)
                trace.rows.append(row)
        return trace
