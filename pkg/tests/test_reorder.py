import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.cluster.hierarchy import linkage as scipy_linkage
from scipy.spatial.distance import squareform

from hyperscope.reorder import (
    Dendrogram,
    DistanceMetric,
    Merge,
    Ordering,
    compute_ordering,
    hierarchical_cluster,
    pairwise_distances,
)
from hyperscope.synthetic import planted_block_matrix


class TestPairwiseDistances:
    def test_jaccard_example(self):
        d = pairwise_distances(
            np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]), DistanceMetric("jaccard")
        )
        assert d[0, 1] == pytest.approx(1 - 1 / 3, abs=1e-12)

    def test_identical_vectors_all_metrics(self):
        v = np.array([[0.2, 0.8, 0.5], [0.2, 0.8, 0.5]])
        assert pairwise_distances(v, DistanceMetric("euclidean"))[0, 1] == 0.0
        assert pairwise_distances(v, DistanceMetric("jaccard"))[0, 1] == 0.0
        assert pairwise_distances(v, DistanceMetric("cosine"))[0, 1] <= 1e-12

    def test_cosine_orthogonal(self):
        d = pairwise_distances(np.array([[1.0, 0.0], [0.0, 1.0]]), DistanceMetric("cosine"))
        assert d[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_cosine_zero_vector_rules(self):
        d = pairwise_distances(
            np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]]), DistanceMetric("cosine")
        )
        assert d[0, 1] == 1.0  # zero vs nonzero
        assert d[0, 2] == 0.0  # zero vs zero

    def test_jaccard_empty_sets_distance_zero(self):
        d = pairwise_distances(
            np.array([[0.1, 0.2], [0.3, 0.1], [1.0, 1.0]]),
            DistanceMetric("jaccard", binarize_threshold=0.5),
        )
        assert d[0, 1] == 0.0  # both binarize to empty sets
        assert d[0, 2] == 1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pairwise_distances([np.array([1.0, 2.0]), np.array([1.0])], DistanceMetric("euclidean"))

    def test_symmetric_zero_diagonal(self):
        rng = np.random.default_rng(0)
        v = rng.random((7, 5))
        for name in ("euclidean", "cosine", "jaccard"):
            d = pairwise_distances(v, DistanceMetric(name))
            np.testing.assert_array_equal(d, d.T)
            np.testing.assert_array_equal(np.diag(d), np.zeros(7))

    def test_metric_validation(self):
        with pytest.raises(ValueError):
            DistanceMetric("manhattan")
        with pytest.raises(ValueError):
            DistanceMetric("jaccard", binarize_threshold=0.0)


class TestHierarchicalCluster:
    def test_three_points_on_line_single_linkage(self):
        # points {0, 1, 5}: brute force over all merge orders says (0,1)@1
        # first, then the pair cluster meets 5 at min(5,4)=4
        pts = np.array([[0.0], [1.0], [5.0]])
        d = pairwise_distances(pts, DistanceMetric("euclidean"))
        dg = hierarchical_cluster(d, "single")
        assert dg.merges[0] == Merge(0, 1, 1.0, 2)
        assert dg.merges[1].height == pytest.approx(4.0)
        assert dg.merges[1].left == 3  # the (0,1) cluster

    def test_two_leaves(self):
        d = np.array([[0.0, 2.5], [2.5, 0.0]])
        dg = hierarchical_cluster(d, "average")
        assert len(dg.merges) == 1
        assert dg.merges[0].height == 2.5

    def test_complete_vs_single_root_height(self):
        pts = np.array([[0.0], [1.0], [5.0]])
        d = pairwise_distances(pts, DistanceMetric("euclidean"))
        single = hierarchical_cluster(d, "single")
        complete = hierarchical_cluster(d, "complete")
        assert [m.left for m in single.merges] == [m.left for m in complete.merges]
        assert single.merges[-1].height == pytest.approx(4.0)
        assert complete.merges[-1].height == pytest.approx(5.0)

    def test_non_finite_distances_rejected(self):
        d = np.array([[0.0, np.inf], [np.inf, 0.0]])
        with pytest.raises(ValueError, match="non-finite"):
            hierarchical_cluster(d, "single")

    def test_deterministic_tie_break_prefers_small_leaf_indices(self):
        # all pairwise distances tie, so every merge must pick the pair with
        # lexicographically smallest (min-leaf-i, min-leaf-j): first (0,1),
        # then cluster{0,1} with 2 (key (0,2) beats (2,3)), then with 3
        d = np.ones((4, 4)) - np.eye(4)
        dg = hierarchical_cluster(d, "average")
        assert (dg.merges[0].left, dg.merges[0].right) == (0, 1)
        assert (dg.merges[1].left, dg.merges[1].right) == (4, 2)
        assert (dg.merges[2].left, dg.merges[2].right) == (5, 3)
        again = hierarchical_cluster(d, "average")
        assert again.merges == dg.merges

    @pytest.mark.parametrize("link", ["single", "complete", "average", "ward"])
    def test_matches_scipy_heights(self, link):
        rng = np.random.default_rng(17)
        for _ in range(8):
            k = int(rng.integers(3, 12))
            pts = rng.random((k, 4))
            d = pairwise_distances(pts, DistanceMetric("euclidean"))
            ours = hierarchical_cluster(d, link)
            ref = scipy_linkage(squareform(d, checks=False), method=link)
            np.testing.assert_allclose(
                sorted(m.height for m in ours.merges), sorted(ref[:, 2]), atol=1e-9
            )

    @pytest.mark.parametrize("link", ["single", "complete", "average"])
    def test_heights_non_decreasing_along_root_paths(self, link):
        rng = np.random.default_rng(3)
        for _ in range(10):
            k = int(rng.integers(3, 10))
            d = pairwise_distances(rng.random((k, 3)), DistanceMetric("euclidean"))
            dg = hierarchical_cluster(d, link)
            heights = {k + dg.n_leaves * 0 + i + dg.n_leaves: m.height
                       for i, m in enumerate(dg.merges)}
            for i, m in enumerate(dg.merges):
                for child in (m.left, m.right):
                    if child >= dg.n_leaves:
                        assert dg.merges[child - dg.n_leaves].height <= m.height + 1e-12


class TestDendrogram:
    def test_leaf_order_keeps_subtrees_contiguous(self):
        rng = np.random.default_rng(5)
        d = pairwise_distances(rng.random((9, 4)), DistanceMetric("euclidean"))
        dg = hierarchical_cluster(d, "average")
        order = dg.leaf_order()
        assert sorted(order) == list(range(9))
        positions = {leaf: i for i, leaf in enumerate(order)}

        def leaves_of(node):
            if node < dg.n_leaves:
                return [node]
            m = dg.merges[node - dg.n_leaves]
            return leaves_of(m.left) + leaves_of(m.right)

        for i in range(len(dg.merges)):
            sub = [positions[leaf] for leaf in leaves_of(dg.n_leaves + i)]
            assert max(sub) - min(sub) + 1 == len(sub)

    def test_merge_count_validated(self):
        with pytest.raises(ValueError):
            Dendrogram(3, ())

    def test_single_leaf(self):
        assert Dendrogram(1, ()).leaf_order() == [0]


class TestComputeOrdering:
    def test_size_ordering(self):
        mat = np.array([[1, 1, 1], [1, 0, 0], [1, 1, 0]], dtype=float)
        ordering = compute_ordering(mat, "rows", "size")
        assert ordering.permutation == (0, 2, 1)

    def test_first_occurrence_is_identity(self):
        mat = np.ones((4, 2))
        assert compute_ordering(mat, "rows", "first_occurrence").permutation == (0, 1, 2, 3)

    def test_size_ties_stable(self):
        mat = np.array([[1, 0], [0, 1], [1, 1], [0, 1]], dtype=float)
        ordering = compute_ordering(mat, "rows", "size")
        assert ordering.permutation == (2, 0, 1, 3)

    def test_planted_blocks_dendrogram_purity(self):
        mat, blocks = planted_block_matrix(30, 30, 3, seed=0)
        ordering = compute_ordering(
            mat, "rows", "dendrogram",
            metric=DistanceMetric("jaccard"), linkage="average",
        )
        seq = [blocks[i] for i in ordering.permutation]
        runs = 1 + sum(1 for a, b in zip(seq, seq[1:]) if a != b)
        assert runs == 3  # each block contiguous: purity 1.0

    def test_cols_axis(self):
        mat = np.array([[1.0, 0.0, 1.0], [1.0, 0.0, 1.0]])
        ordering = compute_ordering(mat, "cols", "size")
        assert ordering.permutation == (0, 2, 1)

    def test_respect_filter_masks_vectors(self):
        mat = np.array([[0.4, 0.0], [0.0, 0.9]])
        raw = compute_ordering(mat, "rows", "size", respect_filter=False)
        filtered = compute_ordering(mat, "rows", "size", respect_filter=True, cutoff=0.5)
        assert raw.permutation == (1, 0)
        assert filtered.permutation == (1, 0)
        filtered_all = compute_ordering(mat, "rows", "size", respect_filter=True, cutoff=0.95)
        assert filtered_all.permutation == (0, 1)  # everything masked: stable

    def test_ward_requires_euclidean(self):
        mat = np.ones((3, 3))
        with pytest.raises(ValueError, match="ward"):
            compute_ordering(mat, "rows", "dendrogram",
                             metric=DistanceMetric("cosine"), linkage="ward")

    def test_single_row_axis(self):
        mat = np.ones((1, 3))
        ordering = compute_ordering(mat, "rows", "dendrogram",
                                    metric=DistanceMetric("euclidean"), linkage="average")
        assert ordering.permutation == (0,)

    def test_size_ordering_permutation_invariant_on_distinct_sums(self):
        rng = np.random.default_rng(9)
        mat = rng.random((8, 5))  # continuous sums: no ties
        base = compute_ordering(mat, "rows", "size")
        perm = rng.permutation(8)
        shuffled = mat[perm]
        again = compute_ordering(shuffled, "rows", "size")
        seq_base = [tuple(mat[i]) for i in base.permutation]
        seq_again = [tuple(shuffled[i]) for i in again.permutation]
        assert seq_base == seq_again

    def test_cluster_structure_permutation_equivariant(self):
        # the merge hierarchy (as leaf sets) must not depend on row labels;
        # the depth-first leaf order itself breaks ties by index, so only
        # the structure is label-free
        rng = np.random.default_rng(9)
        mat = rng.random((8, 5))
        d = pairwise_distances(mat, DistanceMetric("euclidean"))
        base = hierarchical_cluster(d, "average")
        perm = rng.permutation(8)
        shuffled = mat[perm]
        again = hierarchical_cluster(
            pairwise_distances(shuffled, DistanceMetric("euclidean")), "average"
        )

        def subtree_leafsets(dg):
            sets = []
            def leaves_of(node):
                if node < dg.n_leaves:
                    return frozenset([node])
                m = dg.merges[node - dg.n_leaves]
                got = leaves_of(m.left) | leaves_of(m.right)
                sets.append(got)
                return got
            leaves_of(dg.n_leaves + len(dg.merges) - 1)
            return sets

        base_sets = {frozenset(int(i) for i in s) for s in subtree_leafsets(base)}
        # map 'again' leaf ids (positions in shuffled) back to original rows
        again_sets = {frozenset(int(perm[i]) for i in s) for s in subtree_leafsets(again)}
        assert base_sets == again_sets

    @given(
        st.integers(min_value=1, max_value=12),
        st.integers(min_value=1, max_value=6),
        st.sampled_from(["size", "first_occurrence"]),
        st.integers(min_value=0, max_value=2**31 - 1),
    )
    @settings(max_examples=40, deadline=None)
    def test_orderings_are_permutations(self, k, width, strategy, seed):
        mat = np.random.default_rng(seed).random((k, width))
        ordering = compute_ordering(mat, "rows", strategy)
        assert sorted(ordering.permutation) == list(range(k))

    def test_ordering_validates_permutation(self):
        with pytest.raises(ValueError):
            Ordering((0, 0, 1), axis="rows", strategy="size")
