"""Seeded synthetic fixtures: planted-community temporal hypergraphs and
planted block matrices for seriation checks. Deterministic per seed."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hypergraph import IncidenceMatrix, TemporalHypergraph, TimeIndex


@dataclass(frozen=True)
class PlantedFixture:
    implicit: TemporalHypergraph
    explicit: TemporalHypergraph
    clean: np.ndarray  # noiseless block structure shared by all timesteps
    node_community: np.ndarray
    edge_community: np.ndarray


def planted_communities(
    n: int = 100,
    m: int = 30,
    n_steps: int = 6,
    n_communities: int = 3,
    noise: float = 0.1,
    seed: int = 0,
) -> PlantedFixture:
    """Temporal hypergraph with contiguous node/edge community blocks.

    The clean structure links node i and edge j iff they share a community;
    each timestep flips ``round(noise * n * m)`` distinct uniformly chosen
    cells. The explicit hypergraph has one hyperedge per community (the
    relatedness signal the Laplacian sees), constant over time.
    """
    rng = np.random.default_rng(seed)
    node_comm = (np.arange(n) * n_communities) // n
    edge_comm = (np.arange(m) * n_communities) // m
    clean = (node_comm[:, None] == edge_comm[None, :]).astype(np.float64)

    n_flips = int(round(noise * n * m))
    matrices = []
    for _ in range(n_steps):
        step = clean.copy()
        if n_flips:
            flat = rng.choice(n * m, size=n_flips, replace=False)
            step.ravel()[flat] = 1.0 - step.ravel()[flat]
        matrices.append(IncidenceMatrix(step))

    times = tuple(TimeIndex(t, f"{2015 + t:04d}") for t in range(n_steps))
    implicit = TemporalHypergraph(
        node_labels=tuple(f"user-{i}" for i in range(n)),
        edge_labels=tuple(f"topic-{j}" for j in range(m)),
        matrices=tuple(matrices),
        times=times,
        role="implicit",
    )
    community_matrix = IncidenceMatrix(
        (node_comm[:, None] == np.arange(n_communities)[None, :]).astype(np.float64)
    )
    explicit = TemporalHypergraph(
        node_labels=implicit.node_labels,
        edge_labels=tuple(f"community-{c}" for c in range(n_communities)),
        matrices=tuple(community_matrix for _ in range(n_steps)),
        times=times,
        role="explicit",
    )
    return PlantedFixture(implicit, explicit, clean, node_comm, edge_comm)


def planted_block_matrix(
    rows: int = 30,
    cols: int = 30,
    n_blocks: int = 3,
    drop_per_row: int = 2,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Binary matrix with disjoint row/column blocks plus mild within-block
    variation (each row drops a few of its block's columns).

    Returns (matrix, row_block_labels). Within-block jaccard distances stay
    strictly below the across-block distance of 1, so a correct average-
    linkage seriation must keep each block contiguous.
    """
    rng = np.random.default_rng(seed)
    row_block = (np.arange(rows) * n_blocks) // rows
    col_block = (np.arange(cols) * n_blocks) // cols
    mat = (row_block[:, None] == col_block[None, :]).astype(np.float64)
    for i in range(rows):
        support = np.nonzero(mat[i])[0]
        if drop_per_row and support.size > drop_per_row + 1:
            drop = rng.choice(support, size=drop_per_row, replace=False)
            mat[i, drop] = 0.0
    return mat, row_block
