"""Connected undirected networks and Metropolis mixing matrices."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

SYM_TOL = 1e-12
SIGMA_STRICT_TOL = 1e-9


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0..n-1``.

    Edges are stored as sorted ``(i, j)`` pairs with ``i < j``. Every node is
    implicitly its own neighbor; self-loops are never stored.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"node count must be positive, got {self.n}")
        canon = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError(f"self-loop ({i}, {j}) not allowed")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def density(self) -> float:
        pairs = self.n * (self.n - 1) // 2
        return 1.0 if pairs == 0 else self.num_edges / pairs

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            A[i, j] = A[j, i] = True
        return A

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self) -> list[list[int]]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return nbrs

    def is_connected(self) -> bool:
        nbrs = self.neighbors()
        seen = {0}
        queue = deque([0])
        while queue:
            node = queue.popleft()
            for other in nbrs[node]:
                if other not in seen:
                    seen.add(other)
                    queue.append(other)
        return len(seen) == self.n


@dataclass(frozen=True)
class MixingMatrix:
    W: np.ndarray
    sigma: float
    graph: Graph | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.W.shape[0]

    @property
    def kappa_g(self) -> float:
        """Network condition number ``1 / (1 - sigma^2)``."""
        return 1.0 / (1.0 - self.sigma**2)


def target_edge_count(n: int, density: float) -> int:
    """``max(n - 1, round_half_up(density * n(n-1)/2))``, capped at the complete graph."""
    pairs = n * (n - 1) // 2
    want = math.floor(density * pairs + 0.5)
    return min(pairs, max(n - 1, want))


def generate_connected_graph(n: int, density: float, seed: int) -> Graph:
    """Random connected graph with a prescribed edge density.

    A uniformly random recursive spanning tree is drawn first, then extra
    edges are sampled uniformly without replacement from the remaining pairs.
    """
    if n < 1:
        raise ValueError(f"node count must be positive, got {n}")
    if not (0.0 < density <= 1.0):
        raise ValueError(f"density must lie in (0, 1], got {density}")
    if n == 1:
        return Graph(1, ())

    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        parent = order[rng.integers(0, k)]
        child = order[k]
        edges.add((int(min(parent, child)), int(max(parent, child))))

    m = target_edge_count(n, density)
    extra = m - len(edges)
    if extra > 0:
        rest = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in edges]
        picks = rng.choice(len(rest), size=extra, replace=False)
        edges.update(rest[int(k)] for k in np.sort(picks))
    return Graph(n, tuple(edges))


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def complete_graph(n: int) -> Graph:
    return Graph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def spectral_gap(W: np.ndarray) -> float:
    """Second largest eigenvalue magnitude of a symmetric mixing matrix.

    Raises ``numpy.linalg.LinAlgError`` when the symmetric eigensolver fails.
    """
    W = np.asarray(W, dtype=float)
    if W.shape[0] == 1:
        return 0.0
    eig = np.linalg.eigvalsh(0.5 * (W + W.T))[::-1]
    return float(max(abs(eig[1]), abs(eig[-1])))


def metropolis_weights(g: Graph) -> MixingMatrix:
    deg = g.degrees()
    W = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w = 1.0 / (max(deg[i], deg[j]) + 1)
        W[i, j] = W[j, i] = w
    W[np.diag_indices(g.n)] = 1.0 - W.sum(axis=1)
    return MixingMatrix(W=W, sigma=spectral_gap(W), graph=g)


@dataclass
class MixingReport:
    checks: dict[str, bool]
    sigma: float | None
    details: dict[str, float]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def __str__(self) -> str:
        lines = [f"{name:<14s} {'PASS' if passed else 'FAIL'}" for name, passed in self.checks.items()]
        return "\n".join(lines)


def validate_mixing_matrix(W, graph: Graph | None = None, tol: float = SYM_TOL) -> MixingReport:
    """Check the mixing-matrix axioms; never raises.

    Without a graph the sparsity check compares against the pattern implied by
    ``W`` itself, so it only verifies a positive diagonal.
    """
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    checks: dict[str, bool] = {}
    details: dict[str, float] = {}

    details["min_entry"] = float(W.min())
    checks["nonnegative"] = bool(W.min() >= -tol)
    details["asymmetry"] = float(np.max(np.abs(W - W.T)))
    checks["symmetric"] = details["asymmetry"] <= tol
    details["row_sum_dev"] = float(np.max(np.abs(W.sum(axis=1) - 1.0)))
    checks["row_sums"] = details["row_sum_dev"] <= tol

    if graph is not None:
        if graph.n != n:
            checks["sparsity"] = False
        else:
            pattern = graph.adjacency() | np.eye(n, dtype=bool)
            checks["sparsity"] = bool(np.all((W > 0) == pattern))
    else:
        checks["sparsity"] = bool(np.all(np.diag(W) > 0))

    sigma = None
    try:
        sigma = spectral_gap(W)
        details["sigma"] = sigma
        checks["sigma_lt_1"] = sigma < 1.0 - SIGMA_STRICT_TOL
    except np.linalg.LinAlgError:
        checks["sigma_lt_1"] = False
    return MixingReport(checks=checks, sigma=sigma, details=details)


def write_edge_list(g: Graph, fh: TextIO) -> None:
    fh.write(f"{g.n} {g.num_edges}\n")
    for i, j in g.edges:
        fh.write(f"{i + 1} {j + 1}\n")


def read_edge_list(lines: Iterable[str]) -> Graph:
    it = (ln.strip() for ln in lines)
    it = (ln for ln in it if ln)
    try:
        header = next(it)
    except StopIteration:
        raise ValueError("empty edge list") from None
    n, m = (int(tok) for tok in header.split())
    edges = []
    for lineno, ln in enumerate(it, start=2):
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {ln!r}")
        edges.append((int(parts[0]) - 1, int(parts[1]) - 1))
    if len(edges) != m:
        raise ValueError(f"header declares {m} edges, found {len(edges)}")
    return Graph(n, tuple(edges))


def save_mixing_csv(mix: MixingMatrix, path: str | Path) -> None:
    np.savetxt(path, mix.W, delimiter=",", fmt="%.17g")
