"""Matrix seriation: pairwise distances, agglomerative clustering, and the
dendrogram leaf order, plus the simpler size / first-occurrence orderings.

Orderings are computed independently per axis. Clustering is written out
directly (Lance-Williams updates) rather than delegated, because ties must
break deterministically: among all minimal-distance pairs the merge picks the
lexicographically smallest (i, j) of the clusters' minimum leaf indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

METRICS = ("euclidean", "cosine", "jaccard")
LINKAGES = ("single", "complete", "average", "ward")
STRATEGIES = ("dendrogram", "size", "first_occurrence")


@dataclass(frozen=True)
class DistanceMetric:
    """Pairwise distance choice; jaccard binarizes at the given threshold."""

    name: str
    binarize_threshold: float = 0.5

    def __post_init__(self) -> None:
        if self.name not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.name!r}")
        if self.name == "jaccard" and not (0.0 < self.binarize_threshold <= 1.0):
            raise ValueError("jaccard binarization threshold must lie in (0, 1]")


@dataclass(frozen=True)
class Merge:
    """One agglomeration step; child ids follow the leaves-then-merges scheme
    (leaves 0..n-1, the k-th merge creates cluster id n+k)."""

    left: int
    right: int
    height: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    n_leaves: int
    merges: tuple[Merge, ...]

    def __post_init__(self) -> None:
        if self.n_leaves < 1:
            raise ValueError("dendrogram needs at least one leaf")
        if len(self.merges) != self.n_leaves - 1:
            raise ValueError(
                f"{self.n_leaves} leaves require {self.n_leaves - 1} merges, "
                f"got {len(self.merges)}"
            )

    def leaf_order(self) -> list[int]:
        """Depth-first leaf sequence, lower-min-leaf subtree first.

        Children were stored in that order at merge time, so a plain
        left-then-right traversal suffices; every subtree's leaves end up
        contiguous in the result.
        """
        if self.n_leaves == 1:
            return [0]
        order: list[int] = []
        stack = [self.n_leaves + len(self.merges) - 1]
        while stack:
            node = stack.pop()
            if node < self.n_leaves:
                order.append(node)
            else:
                merge = self.merges[node - self.n_leaves]
                stack.append(merge.right)
                stack.append(merge.left)
        return order


@dataclass(frozen=True)
class Ordering:
    """A permutation of one axis plus the strategy that produced it."""

    permutation: tuple[int, ...]
    axis: str
    strategy: str

    def __post_init__(self) -> None:
        if self.axis not in ("rows", "cols"):
            raise ValueError(f"axis must be 'rows' or 'cols', got {self.axis!r}")
        if sorted(self.permutation) != list(range(len(self.permutation))):
            raise ValueError("ordering is not a permutation of 0..k-1")


def _as_array(matrix) -> np.ndarray:
    data = getattr(matrix, "data", matrix)
    return np.asarray(data, dtype=np.float64)


def pairwise_distances(
    vectors: Sequence[np.ndarray] | np.ndarray, metric: DistanceMetric
) -> np.ndarray:
    """Symmetric zero-diagonal distance matrix over equal-length vectors.

    Cosine distance involving a zero vector is 1 against any nonzero vector
    and 0 against another zero vector; jaccard of two empty binarized sets
    is 0. Euclidean and cosine use raw strengths, jaccard binarizes.
    """
    V = np.asarray(vectors, dtype=np.float64)
    if V.ndim != 2:
        raise ValueError("vectors must form a 2-d array (equal lengths)")
    k = V.shape[0]
    if k < 2:
        raise ValueError("need at least two vectors")

    if metric.name == "euclidean":
        d = np.empty((k, k), dtype=np.float64)
        # explicit differences in row chunks: exact zeros for identical rows
        chunk = max(1, int(1e7 // max(1, k * V.shape[1])))
        for start in range(0, k, chunk):
            block = V[start : start + chunk, None, :] - V[None, :, :]
            d[start : start + chunk] = np.sqrt(np.sum(block * block, axis=2))
    elif metric.name == "cosine":
        gram = V @ V.T
        norms = np.sqrt(np.diag(gram).copy())
        zero = norms == 0
        denom = np.outer(np.where(zero, 1.0, norms), np.where(zero, 1.0, norms))
        d = 1.0 - gram / denom
        np.clip(d, 0.0, 2.0, out=d)
        one_zero = zero[:, None] ^ zero[None, :]
        both_zero = zero[:, None] & zero[None, :]
        d[one_zero] = 1.0
        d[both_zero] = 0.0
    else:  # jaccard
        B = (V >= metric.binarize_threshold).astype(np.float64)
        inter = B @ B.T
        sizes = B.sum(axis=1)
        union = sizes[:, None] + sizes[None, :] - inter
        with np.errstate(invalid="ignore", divide="ignore"):
            d = 1.0 - inter / union
        d[union == 0] = 0.0

    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    return d


def _lance_williams(linkage: str, d_ik, d_jk, d_ij, n_i, n_j, n_k):
    if linkage == "single":
        return np.minimum(d_ik, d_jk)
    if linkage == "complete":
        return np.maximum(d_ik, d_jk)
    if linkage == "average":
        return (n_i * d_ik + n_j * d_jk) / (n_i + n_j)
    # ward
    total = n_i + n_j + n_k
    sq = (
        (n_i + n_k) * d_ik**2 + (n_j + n_k) * d_jk**2 - n_k * d_ij**2
    ) / total
    return np.sqrt(np.maximum(sq, 0.0))


def hierarchical_cluster(d: np.ndarray, linkage: str) -> Dendrogram:
    """Agglomerative clustering of a symmetric distance matrix.

    Ties on the minimal distance merge the pair whose clusters have the
    lexicographically smallest (min-leaf-i, min-leaf-j) indices, which makes
    the tree deterministic. Ward heights follow the standard recursive
    update over euclidean distances.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("distance matrix must be square")
    if not np.all(np.isfinite(d)):
        raise ValueError("distance matrix contains non-finite entries")
    if not np.allclose(d, d.T, atol=1e-9):
        raise ValueError("distance matrix must be symmetric")
    n = d.shape[0]
    if n == 1:
        return Dendrogram(1, ())

    # slot i always holds the cluster whose minimum leaf index is i, so a
    # row-major argmin over the working matrix realizes the tie-break rule
    work = d.copy()
    np.fill_diagonal(work, np.inf)
    alive = np.ones(n, dtype=bool)
    sizes = np.ones(n, dtype=np.float64)
    child_id = list(range(n))
    merges: list[Merge] = []

    for step in range(n - 1):
        flat = np.argmin(work)
        i, j = divmod(int(flat), n)
        if i > j:  # symmetric matrix: first occurrence has i < j, keep a guard
            i, j = j, i
        height = float(work[i, j])
        others = alive.copy()
        others[i] = False
        others[j] = False
        idx = np.nonzero(others)[0]
        if idx.size:
            work[i, idx] = _lance_williams(
                linkage, work[i, idx], work[j, idx], height, sizes[i], sizes[j], sizes[idx]
            )
            work[idx, i] = work[i, idx]
        sizes[i] += sizes[j]
        alive[j] = False
        work[j, :] = np.inf
        work[:, j] = np.inf
        work[i, i] = np.inf
        merges.append(
            Merge(child_id[i], child_id[j], height, int(sizes[i]))
        )
        child_id[i] = n + step
    return Dendrogram(n, tuple(merges))


def compute_ordering(
    matrix,
    axis: str,
    strategy: str,
    *,
    metric: DistanceMetric | None = None,
    linkage: str | None = None,
    respect_filter: bool = False,
    cutoff: float = 0.0,
) -> Ordering:
    """Permutation of one axis of a strength matrix.

    ``dendrogram`` orders by the depth-first leaf order of agglomerative
    clustering over the axis vectors; ``size`` sorts by descending strength
    sum with a stable tie-break on the original index; ``first_occurrence``
    is the identity (ingestion order). With ``respect_filter`` the axis
    vectors are masked by the active cutoff threshold before distances.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    A = _as_array(matrix)
    vectors = A if axis == "rows" else A.T
    if axis not in ("rows", "cols"):
        raise ValueError(f"axis must be 'rows' or 'cols', got {axis!r}")
    k = vectors.shape[0]
    if k < 1:
        raise ValueError("axis length must be >= 1")
    if respect_filter:
        vectors = np.where(vectors >= cutoff, vectors, 0.0)

    if strategy == "first_occurrence":
        perm = list(range(k))
        tag = "first_occurrence"
    elif strategy == "size":
        sums = vectors.sum(axis=1)
        perm = np.argsort(-sums, kind="stable").tolist()
        tag = "size"
    else:
        if metric is None or linkage is None:
            raise ValueError("dendrogram strategy needs a metric and a linkage")
        if linkage == "ward" and metric.name != "euclidean":
            raise ValueError("ward linkage is only valid with euclidean distances")
        if k == 1:
            perm = [0]
        else:
            d = pairwise_distances(vectors, metric)
            perm = hierarchical_cluster(d, linkage).leaf_order()
        tag = f"dendrogram({metric.name},{linkage})"
    return Ordering(tuple(perm), axis=axis, strategy=tag)
