from __future__ import annotations

import json

import numpy as np
import pytest

from hyperscope.config import EngineConfig
from hyperscope.engine import Engine
from hyperscope.hypergraph import (
    IncidenceMatrix,
    TemporalHypergraph,
    TimeIndex,
    build_incidence,
)
from hyperscope.predictor import FineTuneConfig, TrainConfig


@pytest.fixture
def tri_matrix() -> IncidenceMatrix:
    """V={u1,u2,u3}, E={e1={u1,u2}, e2={u2,u3}}, unit strengths."""
    return build_incidence([(0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0), (2, 1, 1.0)], 3, 2)


@pytest.fixture
def tri_hypergraph(tri_matrix) -> TemporalHypergraph:
    return TemporalHypergraph(
        node_labels=("u1", "u2", "u3"),
        edge_labels=("e1", "e2"),
        matrices=(tri_matrix,),
        times=(TimeIndex(0, "2015"),),
        role="explicit",
    )


def random_hypergraph(rng: np.random.Generator, n: int, m: int, density: float = 0.4):
    mat = (rng.random((n, m)) < density).astype(np.float64)
    return TemporalHypergraph(
        node_labels=tuple(f"n{i}" for i in range(n)),
        edge_labels=tuple(f"e{j}" for j in range(m)),
        matrices=(IncidenceMatrix(mat),),
        times=(TimeIndex(0, "t0"),),
        role="explicit",
    )


CORPUS_LINES = [
    {"id": "d1", "author": "alice", "timestamp": "2015-03-01T10:00:00Z",
     "text": "the market price rose sharply", "category": "trade"},
    {"id": "d2", "author": "bob", "timestamp": "2015-06-11T09:30:00Z",
     "text": "new shipment route through the harbor", "category": "logistics"},
    {"id": "d3", "author": "alice", "timestamp": "2016-01-05T17:45:00Z",
     "text": "market crash rumors and price panic", "category": "trade"},
    {"id": "d4", "author": "carol", "timestamp": "2016-02-20T12:00:00Z",
     "text": "harbor schedule changed for the shipment", "category": "logistics"},
    {"id": "d5", "author": "bob", "timestamp": "2016-07-09T08:15:00Z",
     "text": "price negotiation at the market stalls", "category": "trade"},
]

ONTOLOGY = {
    "market": ["market", "price"],
    "shipping": ["shipment", "harbor", "route"],
}


@pytest.fixture
def corpus_text() -> str:
    return "\n".join(json.dumps(rec) for rec in CORPUS_LINES)


@pytest.fixture
def ontology_text() -> str:
    return json.dumps(ONTOLOGY)


def fast_engine_config(seed: int = 0) -> EngineConfig:
    """Small step counts so engine-level tests stay quick."""
    return EngineConfig(
        train=TrainConfig(epochs=80, seed=seed),
        fine_tune=FineTuneConfig(steps=20),
        roll_steps=10,
        horizons=2,
    )


@pytest.fixture
def synthetic_engine() -> Engine:
    eng = Engine.from_synthetic(
        {"n": 30, "m": 12, "n_steps": 4, "n_communities": 3, "noise": 0.08, "seed": 5},
        fast_engine_config(),
    )
    eng.train_model(seed=42)
    return eng


@pytest.fixture
def corpus_engine(corpus_text, ontology_text) -> Engine:
    eng = Engine.from_corpus_text(corpus_text, ontology_text, fast_engine_config())
    eng.train_model(seed=7)
    return eng
