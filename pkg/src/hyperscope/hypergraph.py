"""Temporal hypergraph data model.

Nodes and hyperedges carry dense integer ids (0..n-1 / 0..m-1). Membership is
weighted: an incidence cell holds a strength in [0, 1], absent cells are
exactly 0. A temporal hypergraph is an ordered sequence of equally shaped
incidence matrices sharing node/edge identity across timesteps, tagged with
its role ("explicit" metadata-derived vs "implicit" behavior-derived).

The normalized hypergraph Laplacian built here from the explicit hypergraph
serves as the pairwise-relatedness smoothing operator for the predictor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

NodeId = int
EdgeId = int

#: Sorted tuple of node ids sharing at least one sufficiently strong hyperedge
#: with the query node (query node itself excluded).
NeighborSet = tuple[int, ...]

ROLES = ("explicit", "implicit")


@dataclass(frozen=True)
class TimeIndex:
    """Zero-based timestep ordinal with a calendar label (e.g. "2015")."""

    index: int
    label: str

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"timestep ordinal must be >= 0, got {self.index}")
        if not self.label:
            raise ValueError("timestep label must be nonempty")


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class IncidenceMatrix:
    """Weighted node×hyperedge incidence, strengths in [0, 1].

    Backed by a read-only dense float64 array; cells not set at construction
    are exactly 0.0. Use :func:`build_incidence` to construct from sparse
    (node, edge, strength) memberships.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 2:
            raise ValueError(f"incidence must be 2-d, got shape {self.data.shape}")
        if self.data.size and (self.data.min() < 0.0 or self.data.max() > 1.0):
            raise ValueError("incidence strengths must lie in [0, 1]")
        object.__setattr__(self, "data", _readonly(self.data))

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    @property
    def n_cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def strength(self, v: NodeId, e: EdgeId) -> float:
        return float(self.data[v, e])

    def cells(self) -> Iterator[tuple[int, int, float]]:
        """Nonzero cells in row-major order."""
        rows, cols = np.nonzero(self.data)
        for i, j in zip(rows.tolist(), cols.tolist()):
            yield i, j, float(self.data[i, j])

    def toarray(self) -> np.ndarray:
        """Writable copy of the dense matrix."""
        return self.data.copy()


def build_incidence(
    memberships: Iterable[tuple[NodeId, EdgeId, float]], n: int, m: int
) -> IncidenceMatrix:
    """Build an incidence matrix from (node, edge, strength) triples.

    Duplicate (node, edge) pairs keep the maximum strength. Out-of-range ids
    raise IndexError; strengths outside [0, 1] raise ValueError.
    """
    if n < 0 or m < 0:
        raise ValueError("matrix dimensions must be non-negative")
    data = np.zeros((n, m), dtype=np.float64)
    for v, e, s in memberships:
        if not (0 <= v < n):
            raise IndexError(f"node id {v} out of range 0..{n - 1}")
        if not (0 <= e < m):
            raise IndexError(f"edge id {e} out of range 0..{m - 1}")
        if not (0.0 <= s <= 1.0):
            raise ValueError(f"strength {s} for cell ({v}, {e}) outside [0, 1]")
        if s > data[v, e]:
            data[v, e] = s
    return IncidenceMatrix(data)


@dataclass(frozen=True)
class TemporalHypergraph:
    """Sequence of equally shaped incidence matrices over labeled timesteps."""

    node_labels: tuple[str, ...]
    edge_labels: tuple[str, ...]
    matrices: tuple[IncidenceMatrix, ...]
    times: tuple[TimeIndex, ...]
    role: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        if not self.matrices:
            raise ValueError("a temporal hypergraph needs at least one timestep")
        if len(self.matrices) != len(self.times):
            raise ValueError("one TimeIndex per incidence matrix required")
        n, m = len(self.node_labels), len(self.edge_labels)
        for mat in self.matrices:
            if mat.shape != (n, m):
                raise ValueError(
                    f"incidence shape {mat.shape} does not match labels ({n}, {m})"
                )
        ordinals = [t.index for t in self.times]
        if ordinals != sorted(set(ordinals)):
            raise ValueError("timestep ordinals must be strictly increasing")
        object.__setattr__(self, "node_labels", tuple(self.node_labels))
        object.__setattr__(self, "edge_labels", tuple(self.edge_labels))
        object.__setattr__(self, "matrices", tuple(self.matrices))
        object.__setattr__(self, "times", tuple(self.times))

    @property
    def n(self) -> int:
        return len(self.node_labels)

    @property
    def m(self) -> int:
        return len(self.edge_labels)

    @property
    def n_steps(self) -> int:
        return len(self.matrices)

    def matrix(self, t: int) -> IncidenceMatrix:
        if not (0 <= t < self.n_steps):
            raise IndexError(f"timestep {t} out of range 0..{self.n_steps - 1}")
        return self.matrices[t]


@dataclass(frozen=True)
class LaplacianMatrix:
    """Symmetric PSD relatedness operator derived from one hypergraph slice."""

    data: np.ndarray
    role: str

    def __post_init__(self) -> None:
        if self.data.ndim != 2 or self.data.shape[0] != self.data.shape[1]:
            raise ValueError("Laplacian must be square")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        object.__setattr__(self, "data", _readonly(self.data))

    @property
    def n(self) -> int:
        return self.data.shape[0]


def degrees(i: IncidenceMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Vertex degrees (row sums of strengths) and edge degrees (column sums)."""
    return i.data.sum(axis=1), i.data.sum(axis=0)


def neighborhood(
    h: TemporalHypergraph, t: int, v: NodeId, membership_threshold: float
) -> NeighborSet:
    """Nodes sharing a hyperedge with v at time t, both memberships at or
    above the threshold.

    The query node itself is excluded (the underlying notion of "nodes within
    the same hyperedges" is ambiguous on this point; exclusion is this
    library's convention).
    """
    if not (0.0 < membership_threshold <= 1.0):
        raise ValueError("membership threshold must lie in (0, 1]")
    mat = h.matrix(t).data
    if not (0 <= v < mat.shape[0]):
        raise IndexError(f"node id {v} out of range 0..{mat.shape[0] - 1}")
    member = mat >= membership_threshold
    shared = member[:, member[v]].any(axis=1)
    shared[v] = False
    return tuple(np.nonzero(shared)[0].tolist())


def normalized_laplacian(
    h: TemporalHypergraph, t: int, edge_weights: Sequence[float] | None = None
) -> LaplacianMatrix:
    """Normalized hypergraph Laplacian of one timestep slice.

    Computes ``I - D_v^{-1/2} H W D_e^{-1} H^T D_v^{-1/2}`` with vertex
    degrees ``d_v = sum_e w_e * h(v, e)`` and edge degrees
    ``d_e = sum_v h(v, e)``. Zero degrees use the pseudo-inverse convention
    (reciprocal taken as 0), so an isolated node contributes a plain unit
    diagonal row. The result is symmetric positive semi-definite.
    """
    H = h.matrix(t).data
    n, m = H.shape
    if edge_weights is None:
        w = np.ones(m, dtype=np.float64)
    else:
        w = np.asarray(edge_weights, dtype=np.float64)
        if w.shape != (m,):
            raise ValueError(f"expected {m} edge weights, got shape {w.shape}")
        if np.any(w < 0):
            raise ValueError("edge weights must be non-negative")
    dv = H @ w
    de = H.sum(axis=0)
    dv_isqrt = np.where(dv > 0, 1.0 / np.sqrt(np.where(dv > 0, dv, 1.0)), 0.0)
    de_inv = np.where(de > 0, 1.0 / np.where(de > 0, de, 1.0), 0.0)
    Hs = dv_isqrt[:, None] * H
    theta = (Hs * (w * de_inv)[None, :]) @ Hs.T
    lap = np.eye(n) - theta
    lap = (lap + lap.T) / 2.0
    return LaplacianMatrix(lap, role=h.role)
