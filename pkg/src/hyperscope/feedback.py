"""Analyst relevance feedback and the preview/accept/reject transaction.

Assertions are definitive connection strengths for (node, edge, timestep)
cells. Applying them overwrites the input matrix copy; predictions change
only through warm-start fine-tuning from the previously learned parameters
(the model keeps prediction authority - asserted values are never written
into the prediction matrix directly). The signed per-cell delta between the
pre- and post-feedback predictions is the ripple-effect change matrix shown
on the diverging preview scale.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import _accel
from .hypergraph import IncidenceMatrix, LaplacianMatrix
from .predictor import (
    FineTuneConfig,
    ModelParams,
    Observations,
    PredictionMatrix,
    SupervisionMask,
    _descend,
    _gather_labels,
)


class TransactionStateError(RuntimeError):
    """Raised on operations against a transaction in the wrong state."""


@dataclass(frozen=True)
class Assertion:
    node: int
    edge: int
    strength: float
    timestep: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.strength <= 1.0):
            raise ValueError(
                f"asserted strength {self.strength} for ({self.node}, {self.edge}) "
                "outside [0, 1]"
            )


@dataclass(frozen=True)
class FeedbackSet:
    """One batch of assertions; at most one per (node, edge, timestep)."""

    assertions: tuple[Assertion, ...]
    session_id: str = ""
    created_at: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "assertions", tuple(self.assertions))
        keys = [(a.node, a.edge, a.timestep) for a in self.assertions]
        if len(keys) != len(set(keys)):
            raise ValueError("duplicate (node, edge, timestep) assertion in feedback set")
        if self.created_at == 0.0:
            object.__setattr__(self, "created_at", time.time())

    def __len__(self) -> int:
        return len(self.assertions)

    @classmethod
    def build(
        cls, triples: list[tuple[int, int, float, int]], session_id: str = ""
    ) -> "FeedbackSet":
        return cls(
            tuple(Assertion(n, e, s, t) for n, e, s, t in triples), session_id=session_id
        )


@dataclass(frozen=True)
class ChangeMatrix:
    """Elementwise after - before prediction delta (the ripple effect)."""

    data: np.ndarray
    horizon: int = 1
    before_ref: str = ""
    after_ref: str = ""

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)


class FeedbackTransaction:
    """Preview lifecycle holder: previewing -> accepted | rejected (terminal)."""

    def __init__(
        self,
        feedback: FeedbackSet,
        before_params: ModelParams,
        after_params: ModelParams,
        before_preds: tuple[PredictionMatrix, ...],
        after_preds: tuple[PredictionMatrix, ...],
        change: ChangeMatrix,
    ):
        self.state = "previewing"
        self.feedback = feedback
        self.before_params = before_params
        self.after_params = after_params
        self.before_preds = before_preds
        self.after_preds = after_preds
        self.change = change


def apply_feedback(i_next: IncidenceMatrix, f: FeedbackSet) -> IncidenceMatrix:
    """Copy of the matrix with asserted cells overwritten.

    Assertions are definitive, so they replace (not add to) the stored
    strength; every other cell is bit-identical to the input.
    """
    data = i_next.toarray()
    n, m = data.shape
    for a in f.assertions:
        if not (0 <= a.node < n and 0 <= a.edge < m):
            raise IndexError(
                f"assertion ({a.node}, {a.edge}, {a.strength}) outside the "
                f"{n}x{m} matrix"
            )
        data[a.node, a.edge] = a.strength
    return IncidenceMatrix(data)


def fine_tune(
    params: ModelParams,
    i_updated: IncidenceMatrix,
    lap: LaplacianMatrix | None,
    cfg: FineTuneConfig,
    feedback: FeedbackSet | None = None,
    mask: SupervisionMask | None = None,
    labels: IncidenceMatrix | None = None,
) -> tuple[PredictionMatrix, ModelParams]:
    """Warm-start gradient descent from the learned parameters.

    Runs cfg.steps steps (far fewer than cold training needs) on the updated
    matrix; asserted cells join the reconstruction term at weight
    cfg.feedback_weight - including asserted zeros, which are definitive
    no-links. steps=0 returns predictions from the unchanged parameters.
    """
    n, m = i_updated.shape
    if params.n != n or params.m != m:
        raise ValueError("parameter shapes do not match the updated matrix")
    overrides = None
    if feedback is not None and len(feedback):
        overrides = {
            (a.node, a.edge): (a.strength, cfg.feedback_weight) for a in feedback.assertions
        }
    obs = Observations.from_incidence(i_updated, overrides)
    if mask is None:
        mask = SupervisionMask.empty()
    tcfg = params.config
    X, Y, trace, _ = _descend(
        params.X.copy(),
        params.Y.copy(),
        obs,
        mask,
        _gather_labels(labels, mask),
        None if lap is None else lap.data,
        tcfg.lambda_lap,
        tcfg.lambda_frob,
        cfg.steps,
        cfg.learning_rate,
        cfg.early_stop_tol,
    )
    new_params = ModelParams(X, Y, params.rank, tcfg, params.seed, tuple(trace))
    pred = PredictionMatrix(
        _accel.predict_matrix(X, Y), horizon=1, confidence=tcfg.confidence_decay
    )
    return pred, new_params


def change_matrix(before: PredictionMatrix, after: PredictionMatrix) -> ChangeMatrix:
    """Signed per-cell delta after - before between two prediction states."""
    if before.shape != after.shape:
        raise ValueError(f"shape mismatch {before.shape} vs {after.shape}")
    if before.horizon != after.horizon:
        raise ValueError(f"horizon mismatch {before.horizon} vs {after.horizon}")
    return ChangeMatrix(after.data - before.data, horizon=after.horizon)


def resolve(
    tx: FeedbackTransaction, decision: str
) -> tuple[ModelParams, tuple[PredictionMatrix, ...]]:
    """Terminate a previewing transaction.

    Accept commits the fine-tuned parameters/predictions; reject keeps the
    pre-preview state untouched. Either way the transaction becomes terminal
    and a second resolution raises.
    """
    if decision not in ("accept", "reject"):
        raise ValueError(f"decision must be 'accept' or 'reject', got {decision!r}")
    if tx.state != "previewing":
        raise TransactionStateError(f"transaction already {tx.state}")
    if decision == "accept":
        tx.state = "accepted"
        return tx.after_params, tx.after_preds
    tx.state = "rejected"
    return tx.before_params, tx.before_preds
