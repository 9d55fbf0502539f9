"""LIBSVM ingestion, node partitioning, synthetic problems and ground truth."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .problems import LogisticProblem, ProblemOracle, QuadraticProblem, Regularizer


class LibSVMParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SampleSet:
    """Sparse samples in CSR layout with 0-based column indices.

    The LIBSVM text form uses 1-based feature indices; ``row`` and
    ``format_libsvm`` translate back.
    """

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    labels: np.ndarray
    p: int

    def __len__(self) -> int:
        return self.labels.shape[0]

    def row(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[k], self.indptr[k + 1]
        return self.indices[lo:hi] + 1, self.data[lo:hi]

    def to_csr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.data, self.indices, self.indptr), shape=(len(self), self.p))

    def subset(self, start: int, stop: int) -> "SampleSet":
        lo, hi = self.indptr[start], self.indptr[stop]
        return SampleSet(
            indptr=self.indptr[start : stop + 1] - lo,
            indices=self.indices[lo:hi].copy(),
            data=self.data[lo:hi].copy(),
            labels=self.labels[start:stop].copy(),
            p=self.p,
        )

    @classmethod
    def from_dense(cls, X, labels) -> "SampleSet":
        csr = sp.csr_matrix(np.asarray(X, dtype=float))
        return cls(
            indptr=csr.indptr.astype(np.int64),
            indices=csr.indices.astype(np.int64),
            data=csr.data.astype(float),
            labels=np.asarray(labels, dtype=float),
            p=csr.shape[1],
        )


_LABEL_MAPS = (
    ({-1.0, 1.0}, {-1.0: -1.0, 1.0: 1.0}),
    ({0.0, 1.0}, {0.0: -1.0, 1.0: 1.0}),
    ({1.0, 2.0}, {1.0: 1.0, 2.0: -1.0}),
)


def _label_map(raw: set[float]) -> dict[float, float] | None:
    for allowed, mapping in _LABEL_MAPS:
        if raw <= allowed:
            return mapping
    return None


def parse_libsvm(stream: TextIO | Iterable[str] | str, p: int | None = None) -> SampleSet:
    """Parse LIBSVM text into a :class:`SampleSet`.

    Raw label sets ``{-1,+1}`` are kept, ``{0,1}`` maps to ``{-1,+1}`` and
    ``{1,2}`` maps to ``{+1,-1}``. Blank lines and ``#`` comments are skipped.

    Raises:
        LibSVMParseError: on a malformed token, a non-increasing feature index,
            an unmappable label set, or an index above ``p``.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)

    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    raw_labels: list[float] = []
    seen: set[float] = set()
    max_index = 0

    for lineno, line in enumerate(stream, start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        tokens = body.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise LibSVMParseError(lineno, f"bad label {tokens[0]!r}") from None
        if label not in seen:
            seen.add(label)
            if _label_map(seen) is None:
                raise LibSVMParseError(lineno, f"label {tokens[0]!r} makes label set {sorted(seen)} unmappable")
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise LibSVMParseError(lineno, f"malformed feature token {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise LibSVMParseError(lineno, f"malformed feature token {tok!r}") from None
            if idx < 1:
                raise LibSVMParseError(lineno, f"feature index {idx} must be >= 1")
            if idx <= prev:
                raise LibSVMParseError(lineno, f"feature index {idx} not increasing (previous {prev})")
            if not math.isfinite(val):
                raise LibSVMParseError(lineno, f"non-finite value in {tok!r}")
            prev = idx
            indices.append(idx - 1)
            data.append(val)
            if p is not None and idx > p:
                raise LibSVMParseError(lineno, f"feature index {idx} exceeds dimension {p}")
        max_index = max(max_index, prev)
        raw_labels.append(label)
        indptr.append(len(indices))

    mapping = _label_map(seen) or {}
    labels = np.array([mapping[lab] for lab in raw_labels], dtype=float)
    return SampleSet(
        indptr=np.asarray(indptr, dtype=np.int64),
        indices=np.asarray(indices, dtype=np.int64),
        data=np.asarray(data, dtype=float),
        labels=labels,
        p=int(p if p is not None else max_index),
    )


def load_libsvm(path: str | Path, p: int | None = None) -> SampleSet:
    with open(path, encoding="utf-8") as fh:
        return parse_libsvm(fh, p=p)


def format_libsvm(samples: SampleSet) -> str:
    out = []
    for k in range(len(samples)):
        idx, val = samples.row(k)
        label = "+1" if samples.labels[k] > 0 else "-1"
        feats = " ".join(f"{i}:{v!r}" for i, v in zip(idx.tolist(), val.tolist()))
        out.append(f"{label} {feats}".rstrip())
    return "\n".join(out) + ("\n" if out else "")


def partition_sizes(total: int, n: int) -> list[int]:
    base, extra = divmod(total, n)
    return [base + 1 if k < extra else base for k in range(n)]


def partition(samples: SampleSet, n: int) -> list[SampleSet]:
    """Split into ``n`` contiguous blocks in file order, sizes differing by at most one."""
    if n < 1:
        raise ValueError("need at least one node")
    if n > len(samples):
        raise ValueError(f"cannot split {len(samples)} samples over {n} nodes")
    parts = []
    start = 0
    for size in partition_sizes(len(samples), n):
        parts.append(samples.subset(start, start + size))
        start += size
    return parts


def logistic_from_samples(samples: SampleSet, n: int, regularizer="L2", lambda_hat: float = 1.0) -> LogisticProblem:
    blocks = [(part.to_csr(), part.labels) for part in partition(samples, n)]
    return LogisticProblem(blocks, Regularizer(regularizer), lambda_hat, p=samples.p)


def random_orthogonal(p: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def synth_quadratic(p: int, kappa: float, n: int, seed: int) -> QuadraticProblem:
    """Quadratic nodes ``A_i = Q_i^T diag(a) Q_i`` with ``a_1 = 1``, ``a_p = kappa``.

    Interior eigenvalues are drawn from ``U(1, 2)`` (``U(1, kappa)`` when
    ``kappa < 2`` so the spectrum stays inside ``[1, kappa]``). Each node gets
    its own ``Q_i`` and interior draws; ``b_i`` is standard Gaussian.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if p < 2:
        raise ValueError("p must be >= 2")
    rng = np.random.default_rng(seed)
    hi = min(2.0, kappa)
    A = np.empty((n, p, p))
    b = np.empty((n, p))
    for i in range(n):
        Q = random_orthogonal(p, rng)
        a = np.concatenate(([1.0], rng.uniform(1.0, hi, size=p - 2), [kappa]))
        Ai = Q.T @ (a[:, None] * Q)
        A[i] = 0.5 * (Ai + Ai.T)
        b[i] = rng.standard_normal(p)
    return QuadraticProblem(A, b)


def synth_logistic_samples(num_samples: int, p: int, seed: int, noise: float = 0.1, scale: float = 1.0) -> SampleSet:
    """Dense Gaussian features with rows of norm ``scale`` and labels from a noisy linear model."""
    if scale <= 0 or noise < 0:
        raise ValueError("need scale > 0 and noise >= 0")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((num_samples, p))
    X *= scale / np.linalg.norm(X, axis=1, keepdims=True)
    w = rng.standard_normal(p)
    score = X @ w / scale + noise * rng.standard_normal(num_samples)
    labels = np.where(score >= 0, 1.0, -1.0)
    return SampleSet.from_dense(X, labels)


@dataclass(frozen=True)
class SolutionCertificate:
    z_star: np.ndarray
    residual: float
    method: str


def _logistic_centralized(problem: LogisticProblem):
    csr = sp.csr_matrix((problem.data, problem.indices, problem.indptr), shape=(len(problem.labels), problem.p))
    return csr, problem.labels


def _logistic_F(csr, labels, lam, n, z):
    m = labels * (csr @ z)
    loss = np.maximum(-m, 0.0) + np.log1p(np.exp(-np.abs(m)))
    return (loss.sum() + 0.5 * lam * z @ z) / n


def _logistic_hessian(csr, labels, lam, n, z):
    m = labels * (csr @ z)
    s = 0.5 * (1.0 + np.tanh(0.5 * m))
    w = s * (1.0 - s)
    H = (csr.T @ sp.diags(w) @ csr).toarray()
    H[np.diag_indices_from(H)] += lam
    return H / n


def true_solution(problem: ProblemOracle, tol: float = 1e-12, max_iters: int = 1_000_000) -> SolutionCertificate:
    """Minimizer of the global objective for strongly convex problems.

    Quadratics are solved directly. L2 logistic problems run Nesterov's
    accelerated gradient with gradient-based restarts, followed by a few
    Newton polishing steps once the residual is small.
    """
    if isinstance(problem, QuadraticProblem):
        A = problem.A.sum(axis=0)
        z = scipy.linalg.solve(A, -problem.b.sum(axis=0), assume_a="pos")
        res = float(np.linalg.norm(problem.global_gradient(z)))
        return SolutionCertificate(z_star=z, residual=res, method="analytic")

    if not (isinstance(problem, LogisticProblem) and problem.strongly_convex):
        raise ValueError("true_solution needs a quadratic or L2-regularized logistic problem")

    sc = problem.smoothness_constants()
    grad = problem.global_gradient
    step = 1.0 / sc.L
    q = math.sqrt(sc.mu / sc.L)
    momentum = (1.0 - q) / (1.0 + q)
    z = np.zeros(problem.p)
    y = z.copy()
    res = float(np.linalg.norm(grad(z)))
    switch = max(tol, 1e-6)
    it = 0
    while res > switch and it < max_iters:
        g = grad(y)
        z_new = y - step * g
        if g @ (z_new - z) > 0:  # restart when momentum points uphill
            y = z.copy()
            continue
        y = z_new + momentum * (z_new - z)
        z = z_new
        res = float(np.linalg.norm(grad(z)))
        it += 1
    if res > switch:
        raise ConvergenceError(f"accelerated gradient stalled at residual {res:.3e} after {it} iterations")

    csr, labels = _logistic_centralized(problem)
    for _ in range(50):
        if res <= tol:
            break
        g = grad(z)
        H = _logistic_hessian(csr, labels, problem.lambda_hat, problem.n, z)
        z_new = z - scipy.linalg.solve(H, g, assume_a="pos")
        res_new = float(np.linalg.norm(grad(z_new)))
        if res_new >= res:
            break
        z, res = z_new, res_new
    if res > 1e-10 * (1.0 + np.linalg.norm(z)):
        raise ConvergenceError(f"ground truth residual {res:.3e} above certificate threshold")
    return SolutionCertificate(z_star=z, residual=res, method="iterative")
