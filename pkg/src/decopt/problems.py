"""Per-node objective oracles.

Each oracle evaluates the local objectives ``f_i`` either one node at a time
(``local_value``/``local_gradient``) or for a whole stacked iterate block
``X`` of shape ``(n, p)`` (``values``/``gradients``), which is what the
algorithms call every round. The global objective is ``F(z) = mean_i f_i(z)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import kernels


class Regularizer(str, enum.Enum):
    L2 = "L2"
    NONCONVEX = "NONCONVEX"


@dataclass(frozen=True)
class SmoothnessConstants:
    L: float
    mu: float

    def __post_init__(self):
        if not (self.L > 0 and self.L >= self.mu >= 0):
            raise ValueError(f"need L > 0 and L >= mu >= 0, got L={self.L}, mu={self.mu}")

    @property
    def kappa_f(self) -> float:
        return self.L / self.mu if self.mu > 0 else float("inf")


class ProblemOracle:
    n: int
    p: int
    strongly_convex: bool = False

    def values(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradients(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def smoothness_constants(self) -> SmoothnessConstants:
        raise NotImplementedError

    def _single(self, i: int, z) -> np.ndarray:
        if not 0 <= i < self.n:
            raise IndexError(f"node {i} out of range for n={self.n}")
        z = np.asarray(z, dtype=float)
        X = np.zeros((self.n, self.p))
        X[i] = z
        return X

    def local_value(self, i: int, z) -> float:
        return float(self.values(self._single(i, z))[i])

    def local_gradient(self, i: int, z) -> np.ndarray:
        return self.gradients(self._single(i, z))[i]

    def global_value(self, z) -> float:
        X = np.tile(np.asarray(z, dtype=float), (self.n, 1))
        return float(np.mean(self.values(X)))

    def global_gradient(self, z) -> np.ndarray:
        X = np.tile(np.asarray(z, dtype=float), (self.n, 1))
        return self.gradients(X).mean(axis=0)


class QuadraticProblem(ProblemOracle):
    """``f_i(z) = 0.5 z^T A_i z + b_i^T z`` with symmetric positive definite ``A_i``."""

    strongly_convex = True

    def __init__(self, A, b):
        A = np.ascontiguousarray(A, dtype=float)
        b = np.ascontiguousarray(b, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2] or b.shape != A.shape[:2]:
            raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
        if np.max(np.abs(A - A.transpose(0, 2, 1))) > 1e-10:
            raise ValueError("A_i must be symmetric")
        self.A = A
        self.b = b
        self.n, self.p = b.shape
        self._eig = np.linalg.eigvalsh(A)
        if self._eig[:, 0].min() <= 0:
            raise ValueError("A_i must be positive definite")

    def values(self, X):
        return kernels.quad_values(self.A, self.b, np.ascontiguousarray(X, dtype=float))

    def gradients(self, X):
        return kernels.quad_grad(self.A, self.b, np.ascontiguousarray(X, dtype=float))

    def smoothness_constants(self):
        return SmoothnessConstants(L=float(self._eig[:, -1].max()), mu=float(self._eig[:, 0].min()))

    def save(self, path) -> None:
        np.savez(path, A=self.A, b=self.b)

    @classmethod
    def load(cls, path) -> "QuadraticProblem":
        with np.load(path) as data:
            return cls(data["A"], data["b"])


class LogisticProblem(ProblemOracle):
    """Logistic loss over each node's samples plus a ``1/n`` share of the regularizer.

    Node ``i`` holds ``sum_j log(1 + exp(-b_ij a_ij^T z)) + reg(z)/n`` so that
    ``sum_i f_i`` reproduces the full regularized objective.
    """

    def __init__(self, blocks: Sequence[tuple[object, np.ndarray]], regularizer, lambda_hat: float, p: int | None = None):
        if not blocks:
            raise ValueError("need at least one node")
        if lambda_hat < 0:
            raise ValueError("lambda_hat must be nonnegative")
        self.regularizer = Regularizer(regularizer)
        self.lambda_hat = float(lambda_hat)
        mats = [sp.csr_matrix(feat, dtype=float) for feat, _ in blocks]
        self.p = int(p if p is not None else mats[0].shape[1])
        self.n = len(mats)
        labels = []
        for k, (mat, (_, lab)) in enumerate(zip(mats, blocks)):
            lab = np.asarray(lab, dtype=float).ravel()
            if mat.shape[1] != self.p:
                raise ValueError(f"node {k}: expected {self.p} features, got {mat.shape[1]}")
            if lab.shape[0] != mat.shape[0]:
                raise ValueError(f"node {k}: {mat.shape[0]} rows but {lab.shape[0]} labels")
            if not np.all(np.isin(lab, (-1.0, 1.0))):
                raise ValueError(f"node {k}: labels must be +-1")
            labels.append(lab)
        full = sp.vstack(mats, format="csr")
        full.sort_indices()
        self.indptr = full.indptr.astype(np.int64)
        self.indices = full.indices.astype(np.int64)
        self.data = full.data.astype(float)
        self.labels = np.concatenate(labels)
        self.row_node = np.repeat(np.arange(self.n, dtype=np.int64), [m.shape[0] for m in mats])
        self._grams = [np.asarray((m.T @ m).todense()) for m in mats]
        self.strongly_convex = self.regularizer is Regularizer.L2 and self.lambda_hat > 0

    @property
    def _reg_code(self) -> int:
        return kernels.REG_L2 if self.regularizer is Regularizer.L2 else kernels.REG_NONCONVEX

    @property
    def reg_share(self) -> float:
        return self.lambda_hat / self.n

    def values(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        return kernels.logistic_values(
            self.indptr, self.indices, self.data, self.labels, self.row_node, X, self._reg_code, self.reg_share
        )

    def gradients(self, X):
        X = np.ascontiguousarray(X, dtype=float)
        return kernels.logistic_grad(
            self.indptr, self.indices, self.data, self.labels, self.row_node, X, self._reg_code, self.reg_share
        )

    def smoothness_constants(self):
        data_L = max(float(np.linalg.eigvalsh(G)[-1]) if G.size else 0.0 for G in self._grams) / 4.0
        if self.regularizer is Regularizer.L2:
            return SmoothnessConstants(L=data_L + self.reg_share, mu=self.reg_share)
        # |d^2/dz^2 z^2/(1+z^2)| <= 2, attained at z = 0
        return SmoothnessConstants(L=data_L + 2.0 * self.reg_share, mu=0.0)


def finite_difference_check(problem: ProblemOracle, i: int, z, h: float = 1e-6) -> float:
    """Max over coordinates of ``|fd_k - grad_k| / (1 + |grad_k|)`` with central differences."""
    if h <= 0:
        raise ValueError("step must be positive")
    z = np.asarray(z, dtype=float)
    grad = problem.local_gradient(i, z)
    fd = np.empty_like(z)
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = h
        fd[k] = (problem.local_value(i, z + e) - problem.local_value(i, z - e)) / (2.0 * h)
    return float(np.max(np.abs(fd - grad) / (1.0 + np.abs(grad))))
