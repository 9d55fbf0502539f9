"""Synchronous-round decentralized optimizers.

All iterates are stacked as ``(n, p)`` blocks, one row per node. Applying the
mixing matrix ``W @ X`` is one communication round. Each ``*_step`` function
takes the current :class:`NodeStates` and returns a fresh one for round
``t + 1``; the input is never mutated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import kernels
from .problems import ProblemOracle

DIVERGENCE_NORM = 1e12

CG_VARIANTS = {"FR": kernels.CG_FR, "PRP": kernels.CG_PRP, "HS": kernels.CG_HS, "DY": kernels.CG_DY}
GT_FLAVORS = ("ATC", "SEMI_ATC")

ROUNDS_PER_ITERATION = {"dgd": 1, "sdcg": 1, "gt": 2, "abm": 2, "ndcg": 2, "dmbfgs": 2}


class DivergenceError(RuntimeError):
    """Raised when an iterate block turns non-finite or explodes."""

    def __init__(self, t: int, reason: str):
        super().__init__(f"diverged at round {t}: {reason}")
        self.t = t
        self.reason = reason


class DegenerateStepError(ValueError):
    pass


@dataclass(frozen=True)
class AlgoParams:
    alpha: float
    beta_fixed: float = 0.0
    cg_variant: str = "PRP"
    l: float = 1e-4
    u: float = 1e4
    gt_flavor: str = "SEMI_ATC"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.l < self.u:
            raise ValueError(f"need 0 < l < u, got l={self.l}, u={self.u}")
        if self.cg_variant not in CG_VARIANTS:
            raise ValueError(f"unknown cg_variant {self.cg_variant!r}")
        if self.gt_flavor not in GT_FLAVORS:
            raise ValueError(f"unknown gt_flavor {self.gt_flavor!r}")


@dataclass(frozen=True)
class NodeStates:
    """Per-node blocks at round ``t``.

    ``d`` holds the search direction (``d~`` for NDCG). ``v_tilde`` is only
    used by NDCG, ``x_prev`` by ABm and DMBFGS. ``beta`` is the most recent
    per-node conjugate parameter; ``h_lo``/``h_hi``/``tau`` and ``y_flags``
    describe the last DMBFGS quasi-Newton matrices.
    """

    x: np.ndarray
    g: np.ndarray
    t: int = 0
    comm_rounds: int = 0
    v: np.ndarray | None = None
    d: np.ndarray | None = None
    g_prev: np.ndarray | None = None
    v_tilde: np.ndarray | None = None
    x_prev: np.ndarray | None = None
    beta: np.ndarray | None = None
    h_lo: np.ndarray | None = None
    h_hi: np.ndarray | None = None
    tau: np.ndarray | None = None
    y_flags: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.x.shape[0]


def _as_block(x0, oracle: ProblemOracle) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = np.tile(x0, (oracle.n, 1))
    if x0.shape != (oracle.n, oracle.p):
        raise ValueError(f"x0 has shape {x0.shape}, expected {(oracle.n, oracle.p)}")
    return np.array(x0, dtype=float)


def _check_finite(t: int, *blocks: np.ndarray) -> None:
    for blk in blocks:
        if not np.all(np.isfinite(blk)):
            raise DivergenceError(t, "non-finite entry")
    if np.linalg.norm(blocks[0]) > DIVERGENCE_NORM:
        raise DivergenceError(t, f"iterate norm above {DIVERGENCE_NORM:g}")


def _W(W) -> np.ndarray:
    return np.asarray(getattr(W, "W", W), dtype=float)


# ---------------------------------------------------------------- stepsize bounds


def ndcg_stepsize_bound(L: float, sigma: float, n: int) -> float:
    """Largest constant stepsize covered by the NDCG potential-decrease theorem."""
    if L <= 0 or not 0 <= sigma < 1 or n < 1:
        raise ValueError("need L > 0, 0 <= sigma < 1, n >= 1")
    s2 = sigma * sigma
    r5 = math.sqrt(5.0)
    t1 = (1.0 - s2) * n / (32.0 * L * L)
    t2 = 2.0 * (5.0 - 2.0 * r5) * (1.0 - s2) / (4.0 * n * (5.0 * s2 * L * L + 18.0 - 8.0 * r5) + 5.0 * L)
    t3 = (2.0 * r5 - 4.0) / (5.0 * L)
    return min(t1, t2, t3)


def quasi_newton_envelope(L: float, mu: float, l: float, u: float) -> tuple[float, float]:
    """``(psi, Psi)``: eigenvalue bounds every DMBFGS matrix satisfies."""
    return min(l, 1.0 / (2.0 * L)), max(u, 2.0 / mu)


def dmbfgs_stepsize_bound(L: float, mu: float, sigma: float, l: float, u: float) -> float:
    if not 0 < mu <= L or not 0 <= sigma < 1:
        raise ValueError("need 0 < mu <= L and 0 <= sigma < 1")
    psi, Psi = quasi_newton_envelope(L, mu, l, u)
    kappa_H = Psi / psi
    kappa_f = L / mu
    if sigma == 0:
        return 1.0 / (15.0 * L * Psi * kappa_H)
    return math.sqrt(1.0 / 3916.0) * (1.0 - sigma**2) ** 2 / (L * Psi * kappa_H) * math.sqrt(1.0 / kappa_f)


# ---------------------------------------------------------------- DGD


def dgd_init(x0, oracle: ProblemOracle) -> NodeStates:
    x = _as_block(x0, oracle)
    return NodeStates(x=x, g=oracle.gradients(x))


def dgd_step(states: NodeStates, oracle: ProblemOracle, W, alpha: float) -> NodeStates:
    W = _W(W)
    x = W @ states.x - alpha * states.g
    g = oracle.gradients(x)
    _check_finite(states.t + 1, x, g)
    return replace(states, x=x, g=g, g_prev=states.g, t=states.t + 1, comm_rounds=states.comm_rounds + 1)


# ---------------------------------------------------------------- gradient tracking


def gt_init(x0, oracle: ProblemOracle) -> NodeStates:
    x = _as_block(x0, oracle)
    g = oracle.gradients(x)
    return NodeStates(x=x, g=g, v=g.copy())


def _track(W: np.ndarray, v, g_new, g_old) -> np.ndarray:
    return W @ (v + (g_new - g_old))


def gt_step(states: NodeStates, oracle: ProblemOracle, W, alpha: float, flavor: str = "SEMI_ATC") -> NodeStates:
    W = _W(W)
    if flavor == "ATC":
        x = W @ (states.x - alpha * states.v)
    elif flavor == "SEMI_ATC":
        x = W @ states.x - alpha * states.v
    else:
        raise ValueError(f"unknown GT flavor {flavor!r}")
    g = oracle.gradients(x)
    v = _track(W, states.v, g, states.g)
    _check_finite(states.t + 1, x, g, v)
    return replace(states, x=x, g=g, g_prev=states.g, v=v, t=states.t + 1, comm_rounds=states.comm_rounds + 2)


def abm_init(x0, oracle: ProblemOracle) -> NodeStates:
    st = gt_init(x0, oracle)
    return replace(st, x_prev=st.x.copy())


def abm_step(states: NodeStates, oracle: ProblemOracle, W, alpha: float, beta: float) -> NodeStates:
    """Heavy-ball step on top of semi-ATC tracking with a fixed momentum."""
    W = _W(W)
    x = W @ states.x - alpha * states.v
    if beta != 0.0:
        x = x + beta * (states.x - states.x_prev)
    g = oracle.gradients(x)
    v = _track(W, states.v, g, states.g)
    _check_finite(states.t + 1, x, g, v)
    return replace(
        states, x=x, x_prev=states.x, g=g, g_prev=states.g, v=v, t=states.t + 1, comm_rounds=states.comm_rounds + 2
    )


# ---------------------------------------------------------------- SDCG


def sdcg_init(x0, oracle: ProblemOracle) -> NodeStates:
    x = _as_block(x0, oracle)
    g = oracle.gradients(x)
    return NodeStates(x=x, g=g, d=-g)


def sdcg_step(
    states: NodeStates, oracle: ProblemOracle, W, alpha: float, cg_variant: str = "PRP", force_beta_zero: bool = False
) -> NodeStates:
    W = _W(W)
    x = W @ states.x + alpha * states.d
    g = oracle.gradients(x)
    if force_beta_zero:
        d, beta = -g, np.zeros(states.n)
    else:
        d, beta = kernels.sdcg_direction(g, states.g, states.d, CG_VARIANTS[cg_variant], kernels.DENOM_FLOOR)
    _check_finite(states.t + 1, x, g, d)
    return replace(states, x=x, g=g, g_prev=states.g, d=d, beta=beta, t=states.t + 1, comm_rounds=states.comm_rounds + 1)


# ---------------------------------------------------------------- NDCG


def ndcg_init(x0, oracle: ProblemOracle, W, alpha: float) -> NodeStates:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    W = _W(W)
    x = _as_block(x0, oracle)
    g = oracle.gradients(x)
    v = g.copy()
    v_tilde = v + (x - W @ x) / alpha
    return NodeStates(x=x, g=g, v=v, v_tilde=v_tilde, d=-v_tilde)


def ndcg_step(states: NodeStates, oracle: ProblemOracle, W, alpha: float, force_beta_zero: bool = False) -> NodeStates:
    W = _W(W)
    x = states.x + alpha * states.d
    g = oracle.gradients(x)
    v = _track(W, states.v, g, states.g)
    v_tilde = v + (x - W @ x) / alpha
    if force_beta_zero:
        d, beta = -v_tilde, np.zeros(states.n)
    else:
        d, beta = kernels.ndcg_direction(v_tilde, g, states.g, states.v_tilde, states.d, kernels.DENOM_FLOOR)
    _check_finite(states.t + 1, x, g, v, d)
    return replace(
        states,
        x=x,
        g=g,
        g_prev=states.g,
        v=v,
        v_tilde=v_tilde,
        d=d,
        beta=beta,
        t=states.t + 1,
        comm_rounds=states.comm_rounds + 2,
    )


# ---------------------------------------------------------------- DMBFGS


@dataclass(frozen=True)
class YSelection:
    y: np.ndarray
    lam: float
    Lam: float
    used_check: bool


def _eig_pair(ss: float, sy: float, yy: float) -> tuple[float, float]:
    c2 = sy * sy / (ss * yy)
    r = math.sqrt(max(0.0, 1.0 - c2))
    scale = ss / sy
    # 1 - r rewritten as c2 / (1 + r) to avoid cancellation
    return scale * c2 / (1.0 + r), scale * (1.0 + r)


def dmbfgs_eigenpair(s, y) -> tuple[float, float]:
    """Extreme eigenvalues ``(lambda, Lambda)`` of the memoryless BFGS matrix built from ``(s, y)``."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    sy = float(s @ y)
    if sy <= 0:
        raise ValueError("curvature condition s^T y > 0 violated")
    return _eig_pair(float(s @ s), sy, float(y @ y))


def dmbfgs_y_select(s, y_check, y_hat, l: float, u: float) -> YSelection:
    """Pick the tracker difference when its matrix is well conditioned, else the gradient difference."""
    s = np.asarray(s, dtype=float)
    y_check = np.asarray(y_check, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    ss = float(s @ s)
    if ss == 0.0:
        raise DegenerateStepError("s = 0")
    sy = float(s @ y_check)
    yy = float(y_check @ y_check)
    if sy > 0 and yy > 0:
        lam, Lam = _eig_pair(ss, sy, yy)
        if lam >= l and Lam <= u:
            return YSelection(y_check, lam, Lam, True)
    sy = float(s @ y_hat)
    yy = float(y_hat @ y_hat)
    if sy > 0 and yy > 0:
        lam, Lam = _eig_pair(ss, sy, yy)
    else:
        lam = Lam = float("nan")
    return YSelection(y_hat, lam, Lam, False)


def dmbfgs_direction(v_next, s, y) -> np.ndarray:
    """Three-term direction equal to ``-H v_next`` for the memoryless BFGS matrix ``H(s, y)``."""
    v_next = np.asarray(v_next, dtype=float)
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    yy = float(y @ y)
    sy = float(s @ y)
    tau = sy / yy
    theta = float(v_next @ s) / yy
    beta = float(v_next @ y) / yy - 2.0 * float(v_next @ s) / sy
    return -tau * v_next + beta * s + theta * y


def dmbfgs_matrix(s, y) -> np.ndarray:
    """Explicit ``p x p`` memoryless BFGS matrix, for verification only."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    yy = float(y @ y)
    sy = float(s @ y)
    p = s.shape[0]
    return (sy / yy) * np.eye(p) - (np.outer(s, y) + np.outer(y, s)) / yy + 2.0 * np.outer(s, s) / sy


def dmbfgs_init(x0, oracle: ProblemOracle) -> NodeStates:
    x = _as_block(x0, oracle)
    g = oracle.gradients(x)
    return NodeStates(x=x, g=g, v=g.copy(), d=-g)


def dmbfgs_step(states: NodeStates, oracle: ProblemOracle, W, alpha: float, l: float, u: float) -> NodeStates:
    W = _W(W)
    x = W @ (states.x + alpha * states.d)
    g = oracle.gradients(x)
    v = _track(W, states.v, g, states.g)
    s = x - states.x
    d, flags, lam, Lam, tau = kernels.dmbfgs_directions(v, s, v - states.v, g - states.g, l, u, kernels.DENOM_FLOOR)
    _check_finite(states.t + 1, x, g, v, d)
    return replace(
        states,
        x=x,
        x_prev=states.x,
        g=g,
        g_prev=states.g,
        v=v,
        d=d,
        h_lo=lam,
        h_hi=Lam,
        tau=tau,
        y_flags=flags,
        t=states.t + 1,
        comm_rounds=states.comm_rounds + 2,
    )


# ---------------------------------------------------------------- dispatch


@dataclass(frozen=True)
class Stepper:
    name: str
    init: Callable[[np.ndarray], NodeStates]
    step: Callable[[NodeStates], NodeStates]
    rounds_per_iteration: int
    tracks_gradient: bool


def make_stepper(name: str, oracle: ProblemOracle, W, params: AlgoParams) -> Stepper:
    """Bind an algorithm to its oracle, mixing matrix and parameters."""
    name = name.lower()
    W = _W(W)
    a = params.alpha
    if name == "dgd":
        return Stepper(name, lambda x0: dgd_init(x0, oracle), lambda st: dgd_step(st, oracle, W, a), 1, False)
    if name == "gt":
        return Stepper(
            name, lambda x0: gt_init(x0, oracle), lambda st: gt_step(st, oracle, W, a, params.gt_flavor), 2, True
        )
    if name == "abm":
        return Stepper(
            name, lambda x0: abm_init(x0, oracle), lambda st: abm_step(st, oracle, W, a, params.beta_fixed), 2, True
        )
    if name == "sdcg":
        return Stepper(
            name, lambda x0: sdcg_init(x0, oracle), lambda st: sdcg_step(st, oracle, W, a, params.cg_variant), 1, False
        )
    if name == "ndcg":
        return Stepper(name, lambda x0: ndcg_init(x0, oracle, W, a), lambda st: ndcg_step(st, oracle, W, a), 2, True)
    if name == "dmbfgs":
        return Stepper(
            name,
            lambda x0: dmbfgs_init(x0, oracle),
            lambda st: dmbfgs_step(st, oracle, W, a, params.l, params.u),
            2,
            True,
        )
    raise ValueError(f"unknown algorithm {name!r}")
