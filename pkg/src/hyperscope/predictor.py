"""Next-step link prediction as Laplacian-regularized matrix completion.

The incidence matrix at time t is factorized as sigmoid(X @ Y.T) with one
row of X per node and one row of Y per hyperedge. Full-batch gradient
descent minimizes

    sum BCE over supervision cells (a small sample of next-step labels)
  + weighted sum BCE over observed cells of the current matrix
  + lambda_lap * tr(X' L X)          (explicit-hypergraph smoothing)
  + lambda_frob * (|X|_F^2 + |Y|_F^2)

All terms are plain (weighted) sums over their cell sets, so every labeled
cell pulls with comparable force and an empty set contributes zero.

This realization is deliberately the minimal faithful one: a sigmoid-linked
rank-r completion standing in for a deeper architecture, preserving the
interface (input matrix + relatedness Laplacian in, prediction matrix +
parameter snapshot out, warm-startable). Everything is deterministic given
(inputs, config, seed) under a fixed summation order.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Mapping

import numpy as np

from . import _accel
from .hypergraph import IncidenceMatrix, LaplacianMatrix


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; carries the last finite state."""

    def __init__(self, message: str, epoch: int, X: np.ndarray, Y: np.ndarray):
        super().__init__(message)
        self.epoch = epoch
        self.X = X
        self.Y = Y


@dataclass(frozen=True)
class TrainConfig:
    rank: int = 16
    lambda_lap: float = 0.1
    lambda_frob: float = 1e-4
    learning_rate: float = 0.05
    epochs: int = 500
    early_stop_tol: float = 1e-6
    supervision_fraction: float = 0.05
    confidence_decay: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not (0.0 < self.confidence_decay <= 1.0):
            raise ValueError("confidence decay must lie in (0, 1]")


@dataclass(frozen=True)
class FineTuneConfig:
    steps: int = 50
    learning_rate: float = 0.02
    feedback_weight: float = 10.0
    early_stop_tol: float = 0.0  # 0 disables early stopping

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.feedback_weight <= 0:
            raise ValueError("feedback weight must be positive")


@dataclass(frozen=True)
class ModelParams:
    """Factor snapshot: immutable, finite, reproducible from (config, seed)."""

    X: np.ndarray
    Y: np.ndarray
    rank: int
    config: TrainConfig
    seed: int
    loss_trace: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        for name, mat in (("X", self.X), ("Y", self.Y)):
            arr = np.ascontiguousarray(mat, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != self.rank:
                raise ValueError(f"{name} must be 2-d with {self.rank} columns")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite entries")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        object.__setattr__(self, "loss_trace", tuple(self.loss_trace))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.Y.shape[0]


@dataclass(frozen=True)
class PredictionMatrix:
    """Predicted strengths, strictly inside (0, 1), tagged with the future
    horizon it targets and a per-horizon confidence."""

    data: np.ndarray
    horizon: int = 1
    confidence: float = 1.0

    def __post_init__(self) -> None:
        arr = np.clip(np.ascontiguousarray(self.data, dtype=np.float64), 1e-15, 1 - 1e-15)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not (0.0 < self.confidence <= 1.0):
            raise ValueError("confidence must lie in (0, 1]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class SupervisionMask:
    """Cells with known next-step labels (row/col index arrays)."""

    rows: np.ndarray
    cols: np.ndarray
    fraction: float

    def __post_init__(self) -> None:
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        if rows.shape != cols.shape or rows.ndim != 1:
            raise ValueError("mask rows/cols must be matching 1-d arrays")
        rows.flags.writeable = False
        cols.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    def __len__(self) -> int:
        return int(self.rows.shape[0])

    def cell_set(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    @staticmethod
    def empty(fraction: float = 0.0) -> "SupervisionMask":
        return SupervisionMask(np.empty(0, np.int64), np.empty(0, np.int64), fraction)


@dataclass(frozen=True)
class EvalReport:
    auc: float
    recall: float
    threshold: float
    n_pos: int
    n_neg: int
    runtime_s: float
    horizon: int = 1
    per_horizon: tuple[tuple[int, float, float], ...] = ()  # (horizon, auc, recall)


@dataclass(frozen=True)
class Observations:
    """Observed cells entering the reconstruction term: parallel row/col/
    target/weight arrays, row-major cell order."""

    rows: np.ndarray
    cols: np.ndarray
    targets: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_incidence(
        cls,
        i_t: IncidenceMatrix,
        overrides: Mapping[tuple[int, int], tuple[float, float]] | None = None,
    ) -> "Observations":
        """Nonzero cells of i_t with unit weight; ``overrides`` maps a cell to
        (target, weight) and may add cells that are zero in the matrix (a
        definitive asserted no-link is an observation too)."""
        entries: dict[tuple[int, int], tuple[float, float]] = {}
        rows, cols = np.nonzero(i_t.data)
        vals = i_t.data[rows, cols]
        for r, c, v in zip(rows.tolist(), cols.tolist(), vals.tolist()):
            entries[(r, c)] = (v, 1.0)
        if overrides:
            entries.update(overrides)
        ordered = sorted(entries)
        return cls(
            rows=np.array([rc[0] for rc in ordered], dtype=np.int64),
            cols=np.array([rc[1] for rc in ordered], dtype=np.int64),
            targets=np.array([entries[rc][0] for rc in ordered], dtype=np.float64),
            weights=np.array([entries[rc][1] for rc in ordered], dtype=np.float64),
        )

    @staticmethod
    def empty() -> "Observations":
        z = np.empty(0, np.int64)
        f = np.empty(0, np.float64)
        return Observations(z, z.copy(), f, f.copy())

    def __len__(self) -> int:
        return int(self.rows.shape[0])


def split_supervision(
    h_next: IncidenceMatrix, fraction: float, seed: int
) -> tuple[SupervisionMask, SupervisionMask]:
    """Disjoint train/eval supervision masks over next-step cells.

    Each mask targets floor(fraction*n*m) cells, balanced between positive
    (strength > 0) and negative cells up to availability; short classes
    degrade with a warning. Deterministic for a given seed.
    """
    if not (0.0 < fraction <= 0.5):
        raise ValueError("supervision fraction must lie in (0, 0.5]")
    n, m = h_next.shape
    size = int(fraction * n * m)
    pos_target, neg_target = size // 2, size - size // 2

    flat = h_next.data.ravel()
    pos_idx = np.nonzero(flat > 0)[0]
    neg_idx = np.nonzero(flat == 0)[0]
    rng = np.random.default_rng(seed)
    pos_perm = rng.permutation(pos_idx)
    neg_perm = rng.permutation(neg_idx)

    def take(perm: np.ndarray, start: int, want: int, kind: str) -> np.ndarray:
        got = perm[start : start + want]
        if got.shape[0] < want:
            warnings.warn(
                f"only {got.shape[0]} {kind} cells available of {want} requested",
                stacklevel=3,
            )
        return got

    train_flat = np.concatenate(
        [take(pos_perm, 0, pos_target, "positive"), take(neg_perm, 0, neg_target, "negative")]
    )
    eval_flat = np.concatenate(
        [
            take(pos_perm, pos_target, pos_target, "positive"),
            take(neg_perm, neg_target, neg_target, "negative"),
        ]
    )

    def as_mask(flat_idx: np.ndarray) -> SupervisionMask:
        flat_idx = np.sort(flat_idx)
        return SupervisionMask(flat_idx // m, flat_idx % m, fraction)

    return as_mask(train_flat), as_mask(eval_flat)


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise FloatingPointError(
            f"non-finite value in {name} at cell {tuple(int(b) for b in bad)}"
        )


def _loss_and_grads(
    X: np.ndarray,
    Y: np.ndarray,
    observed: Observations,
    mask: SupervisionMask,
    mask_targets: np.ndarray,
    lap: np.ndarray | None,
    lambda_lap: float,
    lambda_frob: float,
    want_grads: bool = True,
) -> tuple[float, np.ndarray | None, np.ndarray | None]:
    _check_finite("X", X)
    _check_finite("Y", Y)
    kernel = _accel.bce_loss_grad
    dX = np.zeros_like(X)
    dY = np.zeros_like(Y)
    loss = 0.0

    if len(mask):
        s_loss, _ = kernel(
            X, Y, mask.rows, mask.cols, mask_targets, np.ones(len(mask)), dX, dY
        )
        loss += s_loss
    if len(observed):
        o_loss, _ = kernel(
            X, Y, observed.rows, observed.cols, observed.targets, observed.weights, dX, dY
        )
        loss += o_loss
    if lap is not None and lambda_lap != 0.0:
        LX = lap @ X
        loss += lambda_lap * float(np.sum(X * LX))
        dX += (2.0 * lambda_lap) * LX
    if lambda_frob != 0.0:
        loss += lambda_frob * (float(np.sum(X * X)) + float(np.sum(Y * Y)))
        dX += (2.0 * lambda_frob) * X
        dY += (2.0 * lambda_frob) * Y
    if not np.isfinite(loss):
        raise FloatingPointError("loss is non-finite")
    if not want_grads:
        return loss, None, None
    return loss, dX, dY


def _gather_labels(labels: IncidenceMatrix | None, mask: SupervisionMask) -> np.ndarray:
    if not len(mask):
        return np.empty(0, dtype=np.float64)
    if labels is None:
        raise ValueError("a nonempty supervision mask needs a labels matrix")
    return labels.data[mask.rows, mask.cols]


def compute_loss(
    params: ModelParams,
    i_t: IncidenceMatrix,
    mask: SupervisionMask,
    labels: IncidenceMatrix | None,
    lap: LaplacianMatrix | None,
    observed: Observations | None = None,
) -> float:
    """Objective value at the given parameters (see module docstring).

    ``observed`` defaults to the nonzero cells of ``i_t`` at unit weight;
    pass an explicit set to reweight or to include asserted zero cells.
    """
    obs = Observations.from_incidence(i_t) if observed is None else observed
    cfg = params.config
    loss, _, _ = _loss_and_grads(
        params.X,
        params.Y,
        obs,
        mask,
        _gather_labels(labels, mask),
        None if lap is None else lap.data,
        cfg.lambda_lap,
        cfg.lambda_frob,
        want_grads=False,
    )
    return loss


def gradients(
    params: ModelParams,
    i_t: IncidenceMatrix,
    mask: SupervisionMask,
    labels: IncidenceMatrix | None,
    lap: LaplacianMatrix | None,
    observed: Observations | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact analytic gradients of :func:`compute_loss` w.r.t. X and Y."""
    obs = Observations.from_incidence(i_t) if observed is None else observed
    cfg = params.config
    _, dX, dY = _loss_and_grads(
        params.X,
        params.Y,
        obs,
        mask,
        _gather_labels(labels, mask),
        None if lap is None else lap.data,
        cfg.lambda_lap,
        cfg.lambda_frob,
    )
    return dX, dY


def _descend(
    X: np.ndarray,
    Y: np.ndarray,
    observed: Observations,
    mask: SupervisionMask,
    mask_targets: np.ndarray,
    lap: np.ndarray | None,
    lambda_lap: float,
    lambda_frob: float,
    steps: int,
    learning_rate: float,
    early_stop_tol: float,
) -> tuple[np.ndarray, np.ndarray, list[float], int]:
    """Full-batch gradient descent; returns (X, Y, loss trace, steps run).

    The trace holds the loss before each applied step plus the final loss.
    Divergence raises TrainingDiverged with the last finite state attached.
    """
    trace: list[float] = []
    steps_run = 0
    for step in range(steps):
        try:
            loss, dX, dY = _loss_and_grads(
                X, Y, observed, mask, mask_targets, lap, lambda_lap, lambda_frob
            )
        except FloatingPointError as exc:
            raise TrainingDiverged(
                f"training diverged at step {step}: {exc}", step, X, Y
            ) from exc
        trace.append(loss)
        X = X - learning_rate * dX
        Y = Y - learning_rate * dY
        steps_run += 1
        if early_stop_tol > 0 and len(trace) >= 2:
            prev, cur = trace[-2], trace[-1]
            if abs(prev - cur) <= early_stop_tol * max(abs(prev), 1e-12):
                break
    final, _, _ = _loss_and_grads(
        X, Y, observed, mask, mask_targets, lap, lambda_lap, lambda_frob, want_grads=False
    )
    trace.append(final)
    return X, Y, trace, steps_run


def seeded_factors(n: int, m: int, cfg: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic initialization: standard normals scaled by 1/sqrt(r)."""
    rng = np.random.default_rng(cfg.seed)
    scale = 1.0 / np.sqrt(cfg.rank)
    X0 = rng.standard_normal((n, cfg.rank)) * scale
    Y0 = rng.standard_normal((m, cfg.rank)) * scale
    return X0, Y0


def train(
    i_t: IncidenceMatrix,
    lap: LaplacianMatrix | None,
    labels_next: IncidenceMatrix | None,
    cfg: TrainConfig,
    mask: SupervisionMask | None = None,
    observed: Observations | None = None,
) -> tuple[PredictionMatrix, ModelParams]:
    """Learn factors predicting the next timestep from the current one.

    When no mask is passed, the train half of :func:`split_supervision` at
    ``cfg.supervision_fraction`` / ``cfg.seed`` is used (requires
    ``labels_next``). Training starts from the seeded initialization and
    early-stops once the relative loss improvement drops below tolerance.
    """
    n, m = i_t.shape
    if labels_next is not None and labels_next.shape != (n, m):
        raise ValueError("labels shape does not match the input matrix")
    if lap is not None and lap.n != n:
        raise ValueError("Laplacian size does not match the node count")
    if mask is None:
        if labels_next is not None:
            mask, _ = split_supervision(labels_next, cfg.supervision_fraction, cfg.seed)
        else:
            mask = SupervisionMask.empty()
    obs = Observations.from_incidence(i_t) if observed is None else observed

    X0, Y0 = seeded_factors(n, m, cfg)
    X, Y, trace, _ = _descend(
        X0,
        Y0,
        obs,
        mask,
        _gather_labels(labels_next, mask),
        None if lap is None else lap.data,
        cfg.lambda_lap,
        cfg.lambda_frob,
        cfg.epochs,
        cfg.learning_rate,
        cfg.early_stop_tol,
    )
    params = ModelParams(X, Y, cfg.rank, cfg, cfg.seed, tuple(trace))
    pred = PredictionMatrix(
        _accel.predict_matrix(X, Y), horizon=1, confidence=cfg.confidence_decay
    )
    return pred, params


def predict(params: ModelParams, horizon: int = 1) -> PredictionMatrix:
    """Prediction matrix sigmoid(X Y') for the given horizon tag."""
    return PredictionMatrix(
        _accel.predict_matrix(params.X, params.Y),
        horizon=horizon,
        confidence=params.config.confidence_decay**horizon,
    )


SNAPSHOT_FORMAT = "hyperscope-model"
SNAPSHOT_VERSION = 1


def snapshot_dict(params: ModelParams) -> dict:
    """Self-describing snapshot content. Floats serialize as shortest
    round-trip decimals, so JSON round-trips the factors bit-exactly."""
    return {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "seed": params.seed,
        "rank": params.rank,
        "hyperparameters": asdict(params.config),
        "X": params.X.tolist(),
        "Y": params.Y.tolist(),
        "loss_trace": list(params.loss_trace),
    }


def save_snapshot(params: ModelParams, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(snapshot_dict(params), fh)


def params_from_snapshot(doc: dict) -> ModelParams:
    if doc.get("format") != SNAPSHOT_FORMAT:
        raise ValueError(f"not a model snapshot: format={doc.get('format')!r}")
    if doc.get("version") != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {doc.get('version')!r}")
    cfg = TrainConfig(**doc["hyperparameters"])
    return ModelParams(
        X=np.array(doc["X"], dtype=np.float64),
        Y=np.array(doc["Y"], dtype=np.float64),
        rank=doc["rank"],
        config=cfg,
        seed=doc["seed"],
        loss_trace=tuple(doc["loss_trace"]),
    )


def load_snapshot(path: str | Path) -> ModelParams:
    with open(path, "r", encoding="utf-8") as fh:
        return params_from_snapshot(json.load(fh))


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """Mid-ranks (1-based); ties share the average of their rank range."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.shape[0], dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(sorted_scores):
        j = i
        while j + 1 < len(sorted_scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def evaluate(
    pred: PredictionMatrix,
    eval_mask: SupervisionMask,
    truth: IncidenceMatrix,
    threshold: float = 0.5,
) -> EvalReport:
    """AUC (pairwise ranking, ties count 1/2) and recall at the threshold
    over the evaluation cells; positives are truth cells with strength > 0,
    predicted-positive means score >= threshold."""
    if not len(eval_mask):
        raise ValueError("evaluation mask is empty")
    t0 = time.perf_counter()
    scores = pred.data[eval_mask.rows, eval_mask.cols]
    y = truth.data[eval_mask.rows, eval_mask.cols] > 0
    n_pos = int(y.sum())
    n_neg = int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("undefined AUC: evaluation cells contain a single class")
    ranks = _average_ranks(scores)
    auc = (float(ranks[y].sum()) - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    predicted_pos = scores >= threshold
    recall = float(np.sum(predicted_pos & y)) / n_pos
    return EvalReport(
        auc=auc,
        recall=recall,
        threshold=threshold,
        n_pos=n_pos,
        n_neg=n_neg,
        runtime_s=time.perf_counter() - t0,
        horizon=pred.horizon,
    )
