"""Directed graphs, Laplacians, union/mirror construction and cut diagnostics.

Adjacency conventions: entry ``a[i, j] >= 0`` is the weight of the edge
``j -> i`` as received by node ``i`` (in-neighbor weight).  The Laplacian
is ``L = D - A`` with the in-degree diagonal ``D``, so every row of ``L``
sums to zero.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ResourceError, ValidationError

MAX_CUT_NODES = 20


@dataclass
class ModeDigraph:
    """One communication digraph, given by its weighted adjacency matrix."""

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"adjacency must be square, got shape {a.shape}")
        if a.shape[0] < 1:
            raise ValidationError("graph needs at least one node")
        if np.any(a < 0):
            raise ValidationError("adjacency weights must be nonnegative")
        if np.any(np.diag(a) != 0):
            raise ValidationError("adjacency diagonal must be exactly zero")
        self.adjacency = a

    @property
    def n_agents(self):
        return self.adjacency.shape[0]


@dataclass
class SwitchingTopology:
    """Ordered collection of mode digraphs over a common node set."""

    modes: list

    def __post_init__(self):
        if not self.modes:
            raise ValidationError("topology needs at least one mode")
        self.modes = [m if isinstance(m, ModeDigraph) else ModeDigraph(m) for m in self.modes]
        n = self.modes[0].n_agents
        for k, m in enumerate(self.modes):
            if m.n_agents != n:
                raise DimensionError(
                    f"mode {k + 1} has {m.n_agents} nodes, expected {n}"
                )

    @property
    def n_agents(self):
        return self.modes[0].n_agents

    @property
    def n_modes(self):
        return len(self.modes)


@dataclass
class CutReport:
    """Minimum cut value together with a subset attaining it."""

    cut_value: float
    witness_subset: tuple


@dataclass
class UnionMirror:
    """Union Laplacian, its symmetric mirror and a connectivity flag."""

    laplacian_union: np.ndarray
    laplacian_mirror: np.ndarray
    union_strongly_connected: bool


@dataclass
class BoundCheck:
    """Result of a quadratic-form lower-bound check."""

    lhs: float
    rhs: float
    holds: bool


def laplacian(g: ModeDigraph) -> np.ndarray:
    """Laplacian L = D - A with in-degree diagonal; rows sum to zero."""
    a = g.adjacency
    return np.diag(a.sum(axis=1)) - a


def _strongly_connected(adjacency: np.ndarray) -> bool:
    """Reachability from node 0 in the graph and its reverse."""
    n = adjacency.shape[0]
    if n == 1:
        return True
    hears = adjacency > 0  # hears[i, j]: i receives from j

    def reach(edges):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            nxt = []
            for i in frontier:
                for j in np.flatnonzero(edges[i]):
                    if not seen[j]:
                        seen[j] = True
                        nxt.append(j)
            frontier = nxt
        return seen.all()

    return reach(hears) and reach(hears.T)


def union_mirror(t: SwitchingTopology) -> UnionMirror:
    """Sum the mode Laplacians and symmetrize; flag strong connectivity.

    The mirror is ``(L_un + L_un^T) / 2`` where ``L_un`` is the Laplacian of
    the union digraph (sum over modes).  Connectivity is decided on the union
    adjacency by reachability.
    """
    l_un = sum(laplacian(m) for m in t.modes)
    a_un = sum(m.adjacency for m in t.modes)
    return UnionMirror(
        laplacian_union=l_un,
        laplacian_mirror=0.5 * (l_un + l_un.T),
        union_strongly_connected=_strongly_connected(a_un),
    )


def minimum_cut(l_mirror: np.ndarray, max_nodes: int = MAX_CUT_NODES) -> CutReport:
    """Exhaustive minimum cut of a mirror Laplacian.

    Edge masses are read off as ``w[i, j] = -L[i, j]`` (the mirror's
    off-diagonal entries are nonpositive for ordinary graphs).  All
    ``2^N - 2`` nonempty proper subsets are enumerated, so N is capped;
    subsets are processed in vectorized chunks to keep N = 20 tractable.
    """
    l_mirror = np.asarray(l_mirror, dtype=float)
    n = l_mirror.shape[0]
    if l_mirror.shape != (n, n):
        raise DimensionError("mirror Laplacian must be square")
    if not np.allclose(l_mirror, l_mirror.T, atol=1e-9):
        raise ValidationError("mirror Laplacian must be symmetric")
    if n > max_nodes:
        raise ResourceError(
            f"minimum cut enumerates 2^N subsets; N={n} exceeds the cap {max_nodes}"
        )
    weights = -l_mirror.copy()
    np.fill_diagonal(weights, 0.0)

    best = np.inf
    best_mask = 0
    bits = np.arange(n)
    chunk = 1 << 16
    for start in range(1, 2**n - 1, chunk):
        masks = np.arange(start, min(start + chunk, 2**n - 1), dtype=np.int64)
        inside = ((masks[:, None] >> bits) & 1).astype(float)
        cuts = np.einsum("mi,mi->m", inside @ weights, 1.0 - inside)
        k = int(np.argmin(cuts))
        if cuts[k] < best:
            best = float(cuts[k])
            best_mask = int(masks[k])
    subset = tuple(int(i) for i in bits[((best_mask >> bits) & 1) == 1])
    return CutReport(cut_value=best, witness_subset=subset)


def stationary_weights(t: SwitchingTopology, tol: float = 1e-10) -> np.ndarray:
    """Positive left null vector of the union Laplacian, normalized to sum 1.

    Exists and is unique when the union digraph is strongly connected; for a
    weight-balanced union it is uniform.
    """
    um = union_mirror(t)
    if not um.union_strongly_connected:
        raise ValidationError(
            "union digraph is not strongly connected; no unique positive weighting"
        )
    _, _, vh = np.linalg.svd(um.laplacian_union.T)
    pi = vh[-1]
    pi = pi / pi.sum()
    if np.any(pi <= 0):
        raise ValidationError("left null vector of the union Laplacian is not positive")
    residual = float(np.linalg.norm(pi @ um.laplacian_union))
    if residual > tol * max(1.0, float(np.abs(um.laplacian_union).max())):
        raise ValidationError(f"stationary weighting residual {residual:.2e} too large")
    return pi


def check_cut_lower_bound(
    t: SwitchingTopology,
    pi: np.ndarray,
    zeta: np.ndarray,
    tol: float = 1e-9,
) -> BoundCheck:
    """Check the weighted quadratic form against its minimum-cut lower bound.

    For weights ``pi > 0`` with ``pi @ zeta == 0``, forms
    ``Q = diag(pi) L_un + L_un^T diag(pi)`` and tests

        zeta^T Q zeta  >=  (min(pi) * c / N^2) * ||zeta||^2

    where ``c`` is the minimum cut of the union mirror.  ``Q`` has zero row
    sums whenever ``pi`` annihilates ``L_un`` from the left, which is the
    reading used throughout this package.
    """
    pi = np.asarray(pi, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    n = t.n_agents
    if pi.shape != (n,) or zeta.shape != (n,):
        raise DimensionError(f"pi and zeta must have shape ({n},)")
    if np.any(pi <= 0):
        raise ValidationError("weights pi must be strictly positive")
    ortho = abs(float(pi @ zeta))
    if ortho > 1e-10 * max(1.0, float(np.linalg.norm(pi) * np.linalg.norm(zeta))):
        raise ValidationError(
            f"zeta must be orthogonal to pi (pi @ zeta = {ortho:.3e})"
        )
    um = union_mirror(t)
    cut = minimum_cut(um.laplacian_mirror)
    q = np.diag(pi) @ um.laplacian_union + um.laplacian_union.T @ np.diag(pi)
    lhs = float(zeta @ q @ zeta)
    rhs = float(pi.min() * cut.cut_value / n**2 * (zeta @ zeta))
    return BoundCheck(lhs=lhs, rhs=rhs, holds=bool(lhs >= rhs - tol))
