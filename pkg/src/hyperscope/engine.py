"""Session engine: committed model state, view state, feedback transactions,
and the provenance recording / replay executor.

One engine instance is one analysis session. All heavy state (hypergraphs,
model parameters, prediction matrices) is immutable once committed, so
concurrent readers can keep serving the last committed snapshot while a
fine-tune job works on copies. Every state-changing operation records
exactly one provenance event (with seeds, configs, and result digests)
before its result is surfaced; determinism of the numeric core makes the
log replayable bit-exactly.
"""

from __future__ import annotations

import base64
import hashlib
import json
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _accel, synthetic
from .config import EngineConfig
from .feedback import (
    ChangeMatrix,
    FeedbackSet,
    FeedbackTransaction,
    TransactionStateError,
    apply_feedback,
    change_matrix,
    fine_tune,
    resolve,
)
from .hierarchy import PartitionTree, VisibleEntry, flat_tree, mutate, project, set_collapse
from .hypergraph import (
    IncidenceMatrix,
    LaplacianMatrix,
    TemporalHypergraph,
    normalized_laplacian,
)
from .ingest import CorpusIndex, Ontology, build_temporal_hypergraphs, parse_corpus, rank_keywords
from .predictor import (
    EvalReport,
    FineTuneConfig,
    ModelParams,
    PredictionMatrix,
    SupervisionMask,
    TrainConfig,
    evaluate,
    snapshot_dict,
    split_supervision,
    train,
)
from .provenance import ProvenanceLog, digest_array
from .reorder import DistanceMetric, Ordering, compute_ordering


class ReplayIncompatibility(RuntimeError):
    """Log and engine (or environment) cannot reproduce each other."""


class BudgetExceeded(ValueError):
    """A viewport window asked for more cells than its level budget allows."""


@dataclass(frozen=True)
class DataBundle:
    """Shared immutable inputs of a session."""

    explicit: TemporalHypergraph
    implicit: TemporalHypergraph
    index: CorpusIndex | None
    source: dict  # provenance payload describing how to rebuild this bundle


def _sha_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def bundle_from_corpus_text(
    corpus_text: str, ontology_text: str, binning: str, inline: bool = True,
    paths: tuple[str, str] | None = None,
) -> DataBundle:
    docs, _ = parse_corpus(corpus_text.splitlines())
    ontology = Ontology.from_mapping(json.loads(ontology_text))
    explicit, implicit, index = build_temporal_hypergraphs(docs, ontology, binning)
    source: dict = {
        "kind": "inline" if inline else "files",
        "binning": binning,
        "corpus_sha": _sha_text(corpus_text),
        "ontology_sha": _sha_text(ontology_text),
    }
    if inline:
        source["corpus"] = corpus_text
        source["ontology"] = ontology_text
    else:
        source["corpus_path"], source["ontology_path"] = paths
    return DataBundle(explicit, implicit, index, source)


def bundle_from_files(corpus_path: str | Path, ontology_path: str | Path, binning: str) -> DataBundle:
    corpus_text = Path(corpus_path).read_text(encoding="utf-8")
    ontology_text = Path(ontology_path).read_text(encoding="utf-8")
    return bundle_from_corpus_text(
        corpus_text, ontology_text, binning, inline=False,
        paths=(str(corpus_path), str(ontology_path)),
    )


def bundle_from_synthetic(params: dict) -> DataBundle:
    fixture = synthetic.planted_communities(**params)
    source = {"kind": "synthetic", "generator": "planted_communities", "params": dict(params)}
    return DataBundle(fixture.explicit, fixture.implicit, None, source)


def load_data_bundle(source: dict) -> DataBundle:
    """Rebuild a bundle from an ingest event payload, verifying digests."""
    kind = source.get("kind")
    if kind == "synthetic":
        return bundle_from_synthetic(source["params"])
    if kind == "inline":
        return bundle_from_corpus_text(source["corpus"], source["ontology"], source["binning"])
    if kind == "files":
        corpus_text = Path(source["corpus_path"]).read_text(encoding="utf-8")
        ontology_text = Path(source["ontology_path"]).read_text(encoding="utf-8")
        if _sha_text(corpus_text) != source["corpus_sha"]:
            raise ReplayIncompatibility(f"corpus file changed: {source['corpus_path']}")
        if _sha_text(ontology_text) != source["ontology_sha"]:
            raise ReplayIncompatibility(f"ontology file changed: {source['ontology_path']}")
        return bundle_from_corpus_text(
            corpus_text, ontology_text, source["binning"], inline=False,
            paths=(source["corpus_path"], source["ontology_path"]),
        )
    raise ReplayIncompatibility(f"unknown data source kind {kind!r}")


@dataclass(frozen=True)
class CommittedState:
    """The snapshot viewports serve: parameters, per-horizon predictions,
    the input matrix those parameters were last descended on, and the
    supervision split the objective keeps using."""

    params: ModelParams
    preds: tuple[PredictionMatrix, ...]
    current_input: IncidenceMatrix
    train_mask: SupervisionMask
    eval_mask: SupervisionMask
    labels: IncidenceMatrix | None
    snapshot_id: str


class Engine:
    TIMELINE_CELL_BUDGET = 4096

    def __init__(
        self,
        data: DataBundle,
        config: EngineConfig,
        log: ProvenanceLog | None = None,
        session_id: str | None = None,
        recording: bool = True,
        record_ingest: bool = True,
    ):
        self.data = data
        self.config = config
        self.session_id = session_id or uuid.uuid4().hex[:12]
        self.log = log if log is not None else ProvenanceLog(backend=_accel.backend())
        self.head: int | None = None
        self._recording = recording

        self.committed: CommittedState | None = None
        self.laplacian: LaplacianMatrix | None = None
        self.threshold: float = config.cutoff_threshold
        self.trees: dict[str, PartitionTree] = {
            "rows": flat_tree("rows", data.implicit.n),
            "cols": flat_tree("cols", data.implicit.m),
        }
        self.tree_history: dict[str, list[PartitionTree]] = {
            axis: [tree] for axis, tree in self.trees.items()
        }
        self.orderings: dict[str, Ordering] = {}
        self.active_ordering: dict[str, str | None] = {"rows": None, "cols": None}
        self.markings: dict[str, bool] = {}
        self.annotations: list[dict] = []
        self.pending_tx: FeedbackTransaction | None = None
        self.pending_input: IncidenceMatrix | None = None
        self._preview_reserved = False
        self.snapshots: dict[str, dict] = {}
        self._proj_cache: dict = {}

        if len(self.log) > 0:
            # resuming an existing (re-loaded) log: continue its trunk
            root = self.log.events[0]
            if root.kind == "ingest" and root.payload.get("source") != data.source:
                raise ReplayIncompatibility(
                    "provenance log belongs to a different data source; "
                    "refusing to append to it"
                )
            self.head = self.log.events[-1].seq
        elif recording and record_ingest:
            self._record("ingest", {
                "source": data.source,
                "engine_config": config.to_dict(),
                "n": data.implicit.n,
                "m": data.implicit.m,
                "timesteps": [t.label for t in data.implicit.times],
            })

    # ------------------------------------------------------------------
    # provenance plumbing
    # ------------------------------------------------------------------

    def _record(self, kind: str, payload: dict) -> None:
        if not self._recording:
            return
        event = self.log.record(kind, payload, self.head, self.session_id)
        self.head = event.seq

    def state_digest(self) -> str:
        if self.committed is None:
            return "untrained"
        h = hashlib.sha256()
        h.update(digest_array(self.committed.params.X).encode())
        h.update(digest_array(self.committed.params.Y).encode())
        for p in self.committed.preds:
            h.update(digest_array(p.data).encode())
        return h.hexdigest()

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------

    @classmethod
    def from_corpus_files(
        cls,
        corpus_path: str | Path,
        ontology_path: str | Path,
        config: EngineConfig | None = None,
        log_path: str | Path | None = None,
        session_id: str | None = None,
    ) -> "Engine":
        config = config or EngineConfig()
        bundle = bundle_from_files(corpus_path, ontology_path, config.binning)
        log = ProvenanceLog(log_path, backend=_accel.backend()) if log_path else None
        return cls(bundle, config, log=log, session_id=session_id)

    @classmethod
    def from_corpus_text(
        cls,
        corpus_text: str,
        ontology_text: str,
        config: EngineConfig | None = None,
        log_path: str | Path | None = None,
        session_id: str | None = None,
    ) -> "Engine":
        config = config or EngineConfig()
        bundle = bundle_from_corpus_text(corpus_text, ontology_text, config.binning)
        log = ProvenanceLog(log_path, backend=_accel.backend()) if log_path else None
        return cls(bundle, config, log=log, session_id=session_id)

    @classmethod
    def from_synthetic(
        cls,
        params: dict,
        config: EngineConfig | None = None,
        log_path: str | Path | None = None,
        session_id: str | None = None,
    ) -> "Engine":
        config = config or EngineConfig()
        bundle = bundle_from_synthetic(params)
        log = ProvenanceLog(log_path, backend=_accel.backend()) if log_path else None
        return cls(bundle, config, log=log, session_id=session_id)

    # ------------------------------------------------------------------
    # model lifecycle
    # ------------------------------------------------------------------

    def _commit(self, params: ModelParams, preds: tuple[PredictionMatrix, ...],
                current_input: IncidenceMatrix, train_mask: SupervisionMask,
                eval_mask: SupervisionMask, labels: IncidenceMatrix | None) -> CommittedState:
        snapshot_id = digest_array(params.X)[:16] + digest_array(params.Y)[:16]
        state = CommittedState(params, preds, current_input, train_mask, eval_mask,
                               labels, snapshot_id)
        self.snapshots[snapshot_id] = snapshot_dict(params)
        self.committed = state
        self._proj_cache.clear()
        return state

    def _roll(
        self,
        params: ModelParams,
        input_matrix: IncidenceMatrix,
        first_cfg: FineTuneConfig,
        feedback: FeedbackSet | None,
        mask: SupervisionMask,
        labels: IncidenceMatrix | None,
    ) -> tuple[tuple[PredictionMatrix, ...], ModelParams]:
        """Multi-horizon roll-forward: horizon 1 descends on the given input
        (with feedback weights when previewing), later horizons feed the
        previous prediction back as input with the fixed roll config. The
        returned parameters are the horizon-1 ones (the session's warm-start
        point for future feedback)."""
        roll_cfg = self.config.roll_config()
        decay = self.config.train.confidence_decay
        preds: list[PredictionMatrix] = []
        cur_params = params
        cur_input = input_matrix
        committed_params = params
        for h in range(1, self.config.horizons + 1):
            cfg_h = first_cfg if h == 1 else roll_cfg
            fb_h = feedback if h == 1 else None
            pred, cur_params = fine_tune(
                cur_params, cur_input, self.laplacian, cfg_h,
                feedback=fb_h, mask=mask, labels=labels,
            )
            preds.append(PredictionMatrix(pred.data, horizon=h, confidence=decay**h))
            if h == 1:
                committed_params = cur_params
            cur_input = IncidenceMatrix(pred.data)
        return tuple(preds), committed_params

    def train_model(self, seed: int | None = None, cfg: TrainConfig | None = None) -> CommittedState:
        """Train from scratch on the last observed transition and commit."""
        base = cfg or self.config.train
        if seed is not None:
            base = TrainConfig(**{**base.__dict__, "seed": seed})
        implicit = self.data.implicit
        T = implicit.n_steps
        t_in = max(T - 2, 0)
        t_lab = T - 1 if T >= 2 else None
        labels = implicit.matrix(t_lab) if t_lab is not None else None

        if self.data.explicit.m > 0:
            self.laplacian = normalized_laplacian(self.data.explicit, t_in)
        else:
            self.laplacian = None

        if labels is not None:
            train_mask, eval_mask = split_supervision(
                labels, base.supervision_fraction, base.seed
            )
        else:
            train_mask = eval_mask = SupervisionMask.empty()

        _, params0 = train(
            implicit.matrix(t_in), self.laplacian, labels, base, mask=train_mask
        )
        # adapt the factors to the last observed matrix at full training depth:
        # the committed parameters must sit at (near) an optimum of the
        # pre-feedback objective for warm-start fine-tuning to pay off
        current_input = implicit.matrix(T - 1)
        adapt_cfg = FineTuneConfig(
            steps=base.epochs,
            learning_rate=base.learning_rate,
            feedback_weight=self.config.fine_tune.feedback_weight,
            early_stop_tol=base.early_stop_tol,
        )
        preds, params1 = self._roll(
            params0, current_input, adapt_cfg, None, train_mask, labels
        )
        state = self._commit(params1, preds, current_input, train_mask, eval_mask, labels)
        self._record("train", {
            "seed": base.seed,
            "config": base.__dict__ | {},
            "backend": _accel.backend(),
            "t_input": t_in,
            "t_labels": t_lab,
            "snapshot": state.snapshot_id,
            "result_digest": digest_array(state.preds[0].data),
        })
        return state

    def adopt_trained_state(self, other: "Engine", train_payload: dict) -> None:
        """Copy another engine's committed state (immutable, so sharing refs
        is safe) and record the matching train event so this session's log
        replays to the identical state."""
        if other.committed is None:
            raise RuntimeError("source engine has no committed state")
        self.laplacian = other.laplacian
        state = other.committed
        self.snapshots[state.snapshot_id] = snapshot_dict(state.params)
        self.committed = state
        self._proj_cache.clear()
        self._record("train", dict(train_payload))

    def evaluate_committed(self, threshold: float = 0.5) -> EvalReport:
        """Backtest report of the committed horizon-1 prediction against the
        held-out evaluation mask (labels = last observed step). Only the
        first horizon has ground truth, so the per-horizon breakdown carries
        that single entry."""
        state = self._require_trained()
        if state.labels is None or not len(state.eval_mask):
            raise ValueError("no held-out labels available for evaluation")
        report = evaluate(state.preds[0], state.eval_mask, state.labels, threshold)
        return EvalReport(
            auc=report.auc,
            recall=report.recall,
            threshold=report.threshold,
            n_pos=report.n_pos,
            n_neg=report.n_neg,
            runtime_s=report.runtime_s,
            horizon=1,
            per_horizon=((1, report.auc, report.recall),),
        )

    def _require_trained(self) -> CommittedState:
        if self.committed is None:
            raise RuntimeError("no trained model committed yet")
        return self.committed

    # ------------------------------------------------------------------
    # feedback transactions
    # ------------------------------------------------------------------

    def reserve_preview(self) -> None:
        """Claim the single preview slot (sync, before any job starts)."""
        if self.pending_tx is not None or self._preview_reserved:
            raise TransactionStateError("a feedback transaction is already pending")
        self._preview_reserved = True

    def cancel_preview(self) -> None:
        self._preview_reserved = False

    def submit_feedback(
        self, assertions: list[tuple[int, int, float, int]],
        reserved: bool = False,
    ) -> FeedbackTransaction:
        """Apply assertions to the current input, warm-start fine-tune, and
        open a previewing transaction with its ripple-effect change matrix."""
        state = self._require_trained()
        if not reserved:
            self.reserve_preview()
        try:
            fset = FeedbackSet.build(list(assertions), session_id=self.session_id)
            i_upd = apply_feedback(state.current_input, fset)
            preds, params1 = self._roll(
                state.params, i_upd, self.config.fine_tune, fset,
                state.train_mask, state.labels,
            )
            change = change_matrix(state.preds[0], preds[0])
            after_id = digest_array(params1.X)[:16] + digest_array(params1.Y)[:16]
            change = ChangeMatrix(
                change.data, horizon=1,
                before_ref=state.snapshot_id, after_ref=after_id,
            )
            tx = FeedbackTransaction(fset, state.params, params1, state.preds, preds, change)
            self.snapshots[after_id] = snapshot_dict(params1)
            self._record("feedback-preview", {
                "assertions": [[a.node, a.edge, a.strength, a.timestep] for a in fset.assertions],
                "fine_tune": self.config.fine_tune.__dict__ | {},
                "backend": _accel.backend(),
                "before_snapshot": state.snapshot_id,
                "after_snapshot": after_id,
                "change_digest": digest_array(change.data),
            })
            self.pending_tx = tx
            self.pending_input = i_upd
            return tx
        finally:
            self._preview_reserved = False

    def resolve_feedback(self, decision: str) -> CommittedState:
        if self.pending_tx is None:
            raise TransactionStateError("no previewing transaction to resolve")
        tx = self.pending_tx
        state = self._require_trained()
        params, preds = resolve(tx, decision)
        if decision == "accept":
            assert self.pending_input is not None
            new_state = self._commit(
                params, preds, self.pending_input,
                state.train_mask, state.eval_mask, state.labels,
            )
        else:
            new_state = state  # untouched, bit-identical
        self._record(f"feedback-{decision}", {
            "decision": decision,
            "snapshot": new_state.snapshot_id,
            "result_digest": digest_array(new_state.preds[0].data),
        })
        self.pending_tx = None
        self.pending_input = None
        return new_state

    # ------------------------------------------------------------------
    # view state
    # ------------------------------------------------------------------

    def set_threshold(self, threshold: float) -> None:
        if not (0.0 <= threshold <= 1.0):
            raise ValueError("cutoff threshold must lie in [0, 1]")
        self.threshold = threshold
        self._record("filter-change", {"threshold": threshold})

    def request_ordering(
        self,
        axis: str,
        strategy: str,
        metric: str | None = None,
        linkage: str | None = None,
        respect_filter: bool = False,
    ) -> tuple[str, Ordering]:
        """Compute and activate an ordering over the axis' visible entries of
        the committed horizon-1 prediction."""
        state = self._require_trained()
        projected, _, _ = self._project_base(
            state.preds[0].data, f"pred-{state.snapshot_id}-1"
        )
        dm = DistanceMetric(metric, binarize_threshold=max(self.threshold, 1e-9)) if metric else None
        ordering = compute_ordering(
            projected, axis, strategy,
            metric=dm, linkage=linkage,
            respect_filter=respect_filter, cutoff=self.threshold,
        )
        ordering_id = f"{axis}-{len(self.orderings) + 1}"
        self.orderings[ordering_id] = ordering
        self.active_ordering[axis] = ordering_id
        self._proj_cache.clear()
        self._record("reorder", {
            "axis": axis,
            "strategy": strategy,
            "metric": metric,
            "linkage": linkage,
            "respect_filter": respect_filter,
            "cutoff": self.threshold,
            "ordering_id": ordering_id,
            "permutation_digest": digest_array(np.asarray(ordering.permutation)),
        })
        return ordering_id, ordering

    def edit_hierarchy(self, axis: str, edit: dict) -> PartitionTree:
        tree = self.trees[axis]
        if edit.get("op") == "set_collapse":
            new_tree = set_collapse(tree, edit["group"], bool(edit["collapsed"]))
        else:
            new_tree = mutate(tree, edit)
        self.trees[axis] = new_tree
        self.tree_history[axis].append(new_tree)
        self.active_ordering[axis] = None  # visible axis changed shape
        self._proj_cache.clear()
        self._record("hierarchy-edit", {"axis": axis, "edit": dict(edit)})
        return new_tree

    def annotate(self, target: dict, text: str) -> None:
        self.annotations.append({"target": dict(target), "text": text})
        self._record("annotation", {"target": dict(target), "text": text})

    def mark(self, row: int, col: int, starred: bool) -> None:
        self.markings[f"{row},{col}"] = starred
        self._record("marking", {"row": row, "col": col, "starred": starred})

    def search(self, query: str, limit: int = 20, offset: int = 0) -> dict:
        """Case-insensitive substring search over node/edge labels and
        document text; recorded as an interaction event."""
        if not query:
            raise ValueError("empty search query")
        q = query.lower()

        visible_pos: dict[str, dict[int, int]] = {"rows": {}, "cols": {}}
        if self.committed is not None:
            desc = self.axis_descriptors()
            for axis in ("rows", "cols"):
                for at, entry in enumerate(desc[axis]):
                    for leaf in entry["leaves"]:
                        visible_pos[axis][leaf] = at

        def label_hits(labels: tuple[str, ...], axis: str) -> list[dict]:
            hits = []
            for idx, label in enumerate(labels):
                pos = label.lower().find(q)
                if pos >= 0:
                    hits.append({
                        "id": idx,
                        "label": label,
                        "span": [pos, pos + len(q)],
                        "visible": visible_pos[axis].get(idx),
                    })
            return hits

        nodes = label_hits(self.data.implicit.node_labels, "rows")
        edges = label_hits(self.data.implicit.edge_labels, "cols")
        documents = []
        total_docs = 0
        if self.data.index is not None:
            for pos, doc in enumerate(self.data.index.documents):
                at = doc.text.lower().find(q)
                if at < 0:
                    continue
                total_docs += 1
                if total_docs <= offset or len(documents) >= limit:
                    continue
                documents.append({
                    "doc_id": doc.doc_id,
                    "position": pos,
                    "span": [at, at + len(q)],
                    "cells": [list(c) for c in self.data.index.cells_for_document(pos)],
                })
        self._record("search", {"query": query, "limit": limit, "offset": offset})
        return {
            "nodes": nodes,
            "edges": edges,
            "documents": documents,
            "total_documents": total_docs,
        }

    # ------------------------------------------------------------------
    # undo / replay
    # ------------------------------------------------------------------

    def undo(self) -> "Engine":
        """Rewind one effective step by replaying from scratch; the log only
        grows (an undo marker is appended, so undone work stays recoverable
        and later actions branch off the earlier state)."""
        if self.head is None:
            raise TransactionStateError("nothing to undo")
        script = self.log.effective_chain(self.head)
        if len(script) < 2:
            raise TransactionStateError("nothing to undo")
        target = script[-2].seq
        rewound = Engine.replay(self.log, target, session_id=self.session_id)
        event = self.log.record(
            "undo", {"undone_to": target}, self.head, self.session_id
        )
        rewound.head = event.seq
        return rewound

    @classmethod
    def replay(
        cls,
        log: ProvenanceLog,
        up_to: int | None = None,
        session_id: str | None = None,
    ) -> "Engine":
        """Re-execute the effective event chain with recorded seeds; the
        resulting state is bit-identical to the live run that wrote the log."""
        if up_to is None:
            heads = log.heads()
            if not heads:
                raise ValueError("cannot replay an empty log")
            up_to = heads[-1]
        log.verify()
        script = log.effective_chain(up_to)
        if not script or script[0].kind != "ingest":
            raise ReplayIncompatibility("event chain does not start at an ingest event")
        first = script[0]
        config = EngineConfig.from_dict(first.payload["engine_config"])
        bundle = load_data_bundle(first.payload["source"])
        engine = cls(
            bundle, config, log=log,
            session_id=session_id or first.session_id,
            recording=False, record_ingest=False,
        )
        engine.head = first.seq
        for event in script[1:]:
            engine._execute(event)
            engine.head = event.seq
        engine._recording = True
        return engine

    def _check_backend(self, payload: dict, what: str) -> None:
        recorded = payload.get("backend")
        if recorded and recorded != _accel.backend():
            raise ReplayIncompatibility(
                f"{what} was recorded on the {recorded!r} kernel backend but this "
                f"engine runs {_accel.backend()!r}; bit-exact replay is not possible"
            )

    def _execute(self, event) -> None:
        kind, p = event.kind, event.payload
        if kind == "train":
            self._check_backend(p, "training")
            state = self.train_model(cfg=TrainConfig(**p["config"]))
            if digest_array(state.preds[0].data) != p["result_digest"]:
                raise ReplayIncompatibility(
                    f"replayed training result diverges from the log at event {event.seq}"
                )
        elif kind == "reorder":
            saved_threshold = self.threshold
            self.threshold = p.get("cutoff", self.threshold)
            self.request_ordering(
                p["axis"], p["strategy"], p.get("metric"), p.get("linkage"),
                p.get("respect_filter", False),
            )
            self.threshold = saved_threshold
        elif kind == "hierarchy-edit":
            self.edit_hierarchy(p["axis"], p["edit"])
        elif kind == "filter-change":
            self.set_threshold(p["threshold"])
        elif kind == "search":
            self.search(p["query"], p.get("limit", 20), p.get("offset", 0))
        elif kind == "feedback-preview":
            self._check_backend(p, "fine-tuning")
            self.submit_feedback([tuple(a) for a in p["assertions"]])
        elif kind in ("feedback-accept", "feedback-reject"):
            state = self.resolve_feedback(p["decision"])
            if digest_array(state.preds[0].data) != p["result_digest"]:
                raise ReplayIncompatibility(
                    f"replayed feedback result diverges from the log at event {event.seq}"
                )
        elif kind == "annotation":
            self.annotate(p["target"], p["text"])
        elif kind == "marking":
            self.mark(p["row"], p["col"], p["starred"])
        elif kind == "ingest":
            raise ReplayIncompatibility("unexpected second ingest event in chain")
        else:
            raise ReplayIncompatibility(f"unknown event kind {kind!r}")

    # ------------------------------------------------------------------
    # viewport serving
    # ------------------------------------------------------------------

    def _project_base(self, matrix: np.ndarray, source_key: str):
        key = ("base", source_key,
               self.trees["rows"].version, self.trees["cols"].version)
        if key not in self._proj_cache:
            self._proj_cache[key] = project(
                matrix, self.trees["rows"], self.trees["cols"], self.config.aggregator
            )
        return self._proj_cache[key]

    def _axis_permutation(self, axis: str, length: int) -> list[int]:
        oid = self.active_ordering[axis]
        if oid is None:
            return list(range(length))
        perm = list(self.orderings[oid].permutation)
        if len(perm) != length:  # stale (hierarchy changed; defensive)
            return list(range(length))
        return perm

    def _view_matrix(self, source_key: str, matrix: np.ndarray):
        """Projected + permuted matrix plus the visible axis descriptors, cached."""
        key = ("view", source_key,
               self.trees["rows"].version, self.trees["cols"].version,
               self.active_ordering["rows"], self.active_ordering["cols"])
        if key not in self._proj_cache:
            projected, row_entries, col_entries = self._project_base(matrix, source_key)
            rperm = self._axis_permutation("rows", len(row_entries))
            cperm = self._axis_permutation("cols", len(col_entries))
            view = projected[np.ix_(rperm, cperm)]
            self._proj_cache[key] = (
                view,
                [row_entries[i] for i in rperm],
                [col_entries[i] for i in cperm],
            )
        return self._proj_cache[key]

    def _select_matrix(self, t: int | None, mode: str) -> tuple[str, np.ndarray, dict]:
        """Resolve a timestep selector to (cache key, matrix, meta).

        Observed steps are 0..T-1; T..T+H-1 address prediction horizons 1..H;
        t=None defaults to the first future step. Change mode serves the
        pending transaction's signed delta matrix instead.
        """
        state = self._require_trained()
        T = self.data.implicit.n_steps
        H = len(state.preds)
        if mode == "change":
            if self.pending_tx is None:
                raise TransactionStateError("change mode needs a previewing transaction")
            return (
                f"change-{self.pending_tx.change.after_ref}",
                self.pending_tx.change.data,
                {"mode": "change", "horizon": 1},
            )
        if t is None:
            t = T  # first predicted step
        if 0 <= t < T:
            return (f"hist-{t}", self.data.implicit.matrix(t).data, {
                "mode": "history", "t": t, "label": self.data.implicit.times[t].label,
            })
        if T <= t < T + H:
            h = t - T + 1
            pred = state.preds[h - 1]
            return (f"pred-{state.snapshot_id}-{h}", pred.data, {
                "mode": "prediction", "t": t, "horizon": h, "confidence": pred.confidence,
            })
        raise IndexError(f"timestep {t} outside 0..{T + H - 1}")

    def axis_descriptors(self) -> dict:
        state = self._require_trained()
        _, row_entries, col_entries = self._view_matrix(
            f"pred-{state.snapshot_id}-1", state.preds[0].data
        )
        return {
            "rows": [self._entry_dict(e, self.data.implicit.node_labels) for e in row_entries],
            "cols": [self._entry_dict(e, self.data.implicit.edge_labels) for e in col_entries],
        }

    @staticmethod
    def _entry_dict(entry: VisibleEntry, labels: tuple[str, ...]) -> dict:
        label = labels[entry.leaves[0]] if entry.kind == "leaf" else entry.label
        return {"kind": entry.kind, "label": label, "leaves": list(entry.leaves)}

    def viewport(
        self,
        level: int,
        row0: int,
        row1: int,
        col0: int,
        col1: int,
        t: int | None = None,
        mode: str = "predictions",
        page: int = 0,
        page_size: int | None = None,
    ) -> dict:
        """Level-discriminated payload for a visible-coordinate window."""
        if not (1 <= level <= 6):
            raise ValueError(f"zoom level must be 1..6, got {level}")
        source_key, matrix, meta = self._select_matrix(t, mode)
        view, row_entries, col_entries = self._view_matrix(source_key, matrix)
        n_vis, m_vis = view.shape
        if not (0 <= row0 <= row1 <= n_vis and 0 <= col0 <= col1 <= m_vis):
            raise IndexError(
                f"viewport [{row0}:{row1}]x[{col0}:{col1}] outside the "
                f"{n_vis}x{m_vis} visible matrix"
            )
        window = view[row0:row1, col0:col1]
        n_cells = window.size
        payload: dict = {
            "level": level,
            "rows": [row0, row1],
            "cols": [col0, col1],
            "threshold": self.threshold,
            "n_cells": int(n_cells),
            **meta,
        }

        if level == 1:
            if n_cells > self.config.level1_cell_budget:
                raise BudgetExceeded(
                    f"level-1 window of {n_cells} cells exceeds the budget of "
                    f"{self.config.level1_cell_budget}"
                )
            bits = np.packbits((window >= self.threshold).ravel())
            payload["encoding"] = "packbits-base64"
            payload["bits"] = base64.b64encode(bits.tobytes()).decode("ascii")
        elif level == 2:
            if mode == "change":
                keep = np.abs(window) >= 1e-3
            else:
                keep = window >= self.threshold
            rr, cc = np.nonzero(keep)
            payload["precision"] = 6
            payload["cells"] = {
                "row": (rr + row0).tolist(),
                "col": (cc + col0).tolist(),
                "value": np.round(window[rr, cc], 6).tolist(),
            }
        elif level in (3, 4):
            if n_cells > self.TIMELINE_CELL_BUDGET:
                raise BudgetExceeded(
                    f"timeline window of {n_cells} cells exceeds the budget of "
                    f"{self.TIMELINE_CELL_BUDGET}"
                )
            payload["cells"] = [
                self._timeline_cell(row_entries[r], col_entries[c], r, c)
                for r in range(row0, row1)
                for c in range(col0, col1)
            ]
        elif level == 5:
            payload["cells"] = [
                {
                    "row": r, "col": c,
                    "keywords": self._cell_keywords(row_entries[r], col_entries[c], t),
                }
                for r in range(row0, row1)
                for c in range(col0, col1)
            ]
        else:  # level 6
            size = self._page_size(page_size)
            payload["page"] = page
            payload["page_size"] = size
            payload["cells"] = [
                {"row": r, "col": c,
                 **self._cell_documents(row_entries[r], col_entries[c], t, page, size)}
                for r in range(row0, row1)
                for c in range(col0, col1)
            ]

        starred = [
            key for key, on in self.markings.items() if on
        ]
        if starred:
            payload["markings"] = starred
        return payload

    def _page_size(self, page_size: int | None) -> int:
        size = self.config.page_size_documents if page_size is None else page_size
        if not (1 <= size <= self.config.max_page_size_documents):
            raise ValueError(
                f"document page size {size} outside 1..{self.config.max_page_size_documents}"
            )
        return size

    def _timeline_cell(self, row: VisibleEntry, col: VisibleEntry, r: int, c: int) -> dict:
        state = self._require_trained()
        agg = self.config.aggregator
        history = []
        for step in self.data.implicit.matrices:
            block = step.data[np.ix_(row.leaves, col.leaves)]
            history.append(round(float(block.max() if agg == "max" else block.mean()), 6))
        predicted = []
        confidence = []
        for pred in state.preds:
            block = pred.data[np.ix_(row.leaves, col.leaves)]
            predicted.append(round(float(block.max() if agg == "max" else block.mean()), 6))
            confidence.append(round(pred.confidence, 6))
        return {
            "row": r, "col": c,
            "history": history,
            "predicted": predicted,
            "confidence": confidence,
        }

    def _cell_doc_positions(self, row: VisibleEntry, col: VisibleEntry, t: int | None) -> list[int]:
        index = self.data.index
        if index is None:
            return []
        T = self.data.implicit.n_steps
        steps = [t] if t is not None and 0 <= t < T else list(range(T))
        positions: list[int] = []
        seen = set()
        for node in row.leaves:
            for edge in col.leaves:
                for step in steps:
                    for pos in index.cell_docs.get((node, edge, step), ()):
                        if pos not in seen:
                            seen.add(pos)
                            positions.append(pos)
        return positions

    def _cell_keywords(self, row: VisibleEntry, col: VisibleEntry, t: int | None) -> list:
        index = self.data.index
        if index is None:
            return []
        positions = self._cell_doc_positions(row, col, t)
        ranked = rank_keywords(index, positions, self.config.keywords_top_k)
        return [[term, round(score, 6)] for term, score in ranked]

    def _cell_documents(self, row: VisibleEntry, col: VisibleEntry, t: int | None,
                        page: int, size: int) -> dict:
        index = self.data.index
        positions = self._cell_doc_positions(row, col, t)
        start = page * size
        chunk = positions[start : start + size]
        documents = []
        for pos in chunk:
            doc = index.documents[pos]
            documents.append({
                "doc_id": doc.doc_id,
                "author": doc.author,
                "timestamp": doc.timestamp.isoformat(),
                "excerpt": doc.text[:240],
            })
        return {"documents": documents, "total": len(positions)}

    def cell_detail(self, node: int, edge: int, what: str, t: int | None = None,
                    page: int = 0, page_size: int | None = None) -> dict:
        """Detail endpoints for one underlying (node, edge) cell."""
        row = VisibleEntry("leaf", str(node), (node,))
        col = VisibleEntry("leaf", str(edge), (edge,))
        n, m = self.data.implicit.n, self.data.implicit.m
        if not (0 <= node < n and 0 <= edge < m):
            raise IndexError(f"cell ({node}, {edge}) outside the {n}x{m} matrix")
        if what == "timeline":
            return self._timeline_cell(row, col, node, edge)
        if what == "keywords":
            return {"row": node, "col": edge, "keywords": self._cell_keywords(row, col, t)}
        if what == "documents":
            size = self._page_size(page_size)
            return {"row": node, "col": edge, "page": page, "page_size": size,
                    **self._cell_documents(row, col, t, page, size)}
        raise ValueError(f"unknown cell detail {what!r}")
