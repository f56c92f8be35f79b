import dataclasses

import numpy as np
import pytest

from hyperscope.engine import BudgetExceeded, Engine, ReplayIncompatibility
from hyperscope.feedback import TransactionStateError
from hyperscope.predictor import FineTuneConfig
from hyperscope.provenance import ProvenanceLog

from conftest import fast_engine_config


def pick_low_zero_cell(engine):
    state = engine.committed
    zr, zc = np.nonzero(state.current_input.data == 0)
    pick = int(np.argmin(state.preds[0].data[zr, zc]))
    return int(zr[pick]), int(zc[pick])


class TestModelLifecycle:
    def test_committed_pred_matches_params(self, synthetic_engine):
        state = synthetic_engine.committed
        expected = 1.0 / (1.0 + np.exp(-(state.params.X @ state.params.Y.T)))
        np.testing.assert_allclose(state.preds[0].data, expected, atol=1e-12)

    def test_horizon_confidences_decay(self, synthetic_engine):
        confidences = [p.confidence for p in synthetic_engine.committed.preds]
        assert confidences == sorted(confidences, reverse=True)
        decay = synthetic_engine.config.train.confidence_decay
        assert confidences[0] == pytest.approx(decay)
        assert confidences[1] == pytest.approx(decay**2)

    def test_feedback_accept_moves_committed_prediction(self, synthetic_engine):
        eng = synthetic_engine
        v, e = pick_low_zero_cell(eng)
        before = float(eng.committed.preds[0].data[v, e])
        eng.submit_feedback([(v, e, 1.0, 3)])
        eng.resolve_feedback("accept")
        after = float(eng.committed.preds[0].data[v, e])
        assert after > before

    def test_reject_is_bitwise_lossless(self, synthetic_engine):
        eng = synthetic_engine
        digest = eng.state_digest()
        threshold = eng.threshold
        v, e = pick_low_zero_cell(eng)
        eng.submit_feedback([(v, e, 1.0, 3)])
        eng.resolve_feedback("reject")
        assert eng.state_digest() == digest
        assert eng.threshold == threshold
        assert eng.pending_tx is None

    def test_empty_feedback_zero_steps_is_bit_exact_noop(self, synthetic_engine):
        eng = synthetic_engine
        eng.config = dataclasses.replace(eng.config, fine_tune=FineTuneConfig(steps=0))
        before = [p.data.tobytes() for p in eng.committed.preds]
        tx = eng.submit_feedback([])
        after = [p.data.tobytes() for p in tx.after_preds]
        assert before == after
        assert np.all(tx.change.data == 0.0)

    def test_single_pending_transaction(self, synthetic_engine):
        eng = synthetic_engine
        eng.submit_feedback([(0, 0, 1.0, 3)])
        with pytest.raises(TransactionStateError):
            eng.submit_feedback([(1, 1, 1.0, 3)])
        with pytest.raises(TransactionStateError):
            eng.reserve_preview()
        eng.resolve_feedback("reject")

    def test_resolve_without_preview_fails(self, synthetic_engine):
        with pytest.raises(TransactionStateError):
            synthetic_engine.resolve_feedback("accept")

    def test_read_isolation_before_resolution(self, synthetic_engine):
        eng = synthetic_engine
        base = eng.viewport(2, 0, 10, 0, 10)
        v, e = pick_low_zero_cell(eng)
        eng.submit_feedback([(v, e, 1.0, 3)])
        assert eng.viewport(2, 0, 10, 0, 10) == base  # committed view unchanged
        eng.resolve_feedback("reject")


class TestViewport:
    def test_level1_binarizes_at_threshold(self, synthetic_engine):
        import base64
        eng = synthetic_engine
        eng.set_threshold(0.5)
        payload = eng.viewport(1, 0, 4, 0, 4)
        bits = np.unpackbits(
            np.frombuffer(base64.b64decode(payload["bits"]), dtype=np.uint8)
        )[: payload["n_cells"]]
        window = eng.committed.preds[0].data[0:4, 0:4]
        np.testing.assert_array_equal(bits.reshape(4, 4), (window >= 0.5).astype(np.uint8))

    def test_level2_returns_only_cells_at_or_above_threshold(self, synthetic_engine):
        eng = synthetic_engine
        eng.set_threshold(0.6)
        payload = eng.viewport(2, 0, eng.data.implicit.n, 0, eng.data.implicit.m)
        values = payload["cells"]["value"]
        assert all(v >= 0.6 for v in values)

    def test_timeline_has_history_plus_decaying_predictions(self, synthetic_engine):
        eng = synthetic_engine
        payload = eng.viewport(3, 0, 2, 0, 2)
        cell = payload["cells"][0]
        T = eng.data.implicit.n_steps
        assert len(cell["history"]) == T
        assert len(cell["predicted"]) == eng.config.horizons
        decay = eng.config.train.confidence_decay
        assert cell["confidence"] == [round(decay, 6), round(decay**2, 6)]

    def test_change_mode_serves_signed_deltas(self, synthetic_engine):
        eng = synthetic_engine
        v, e = pick_low_zero_cell(eng)
        with pytest.raises(TransactionStateError):
            eng.viewport(2, 0, 4, 0, 4, mode="change")
        tx = eng.submit_feedback([(v, e, 1.0, 3)])
        payload = eng.viewport(2, 0, eng.data.implicit.n, 0, eng.data.implicit.m, mode="change")
        assert payload["mode"] == "change"
        idx = payload["cells"]["row"].index(v)
        assert payload["cells"]["col"][idx] == e or any(
            r == v and c == e
            for r, c in zip(payload["cells"]["row"], payload["cells"]["col"])
        )
        deltas = payload["cells"]["value"]
        assert any(d > 0 for d in deltas)
        eng.resolve_feedback("reject")

    def test_history_timesteps_serve_observed_matrices(self, synthetic_engine):
        eng = synthetic_engine
        payload = eng.viewport(2, 0, 5, 0, 5, t=0)
        assert payload["mode"] == "history"
        assert payload["label"] == "2015"

    def test_level1_budget_enforced(self, synthetic_engine):
        eng = synthetic_engine
        eng.config = dataclasses.replace(eng.config, level1_cell_budget=64)
        with pytest.raises(BudgetExceeded):
            eng.viewport(1, 0, 20, 0, 12)

    def test_bounds_checked(self, synthetic_engine):
        with pytest.raises(IndexError):
            synthetic_engine.viewport(2, 0, 99, 0, 5)
        with pytest.raises(IndexError):
            synthetic_engine.viewport(2, 0, 5, 0, 5, t=99)

    def test_ordering_applies_to_viewport_axes(self, synthetic_engine):
        eng = synthetic_engine
        base = eng.viewport(2, 0, eng.data.implicit.n, 0, eng.data.implicit.m)
        oid, ordering = eng.request_ordering("rows", "size")
        assert eng.active_ordering["rows"] == oid
        permuted = eng.viewport(2, 0, eng.data.implicit.n, 0, eng.data.implicit.m)
        # same multiset of values, possibly different row placement
        assert sorted(base["cells"]["value"]) == sorted(permuted["cells"]["value"])

    def test_projection_through_collapsed_group(self, synthetic_engine):
        eng = synthetic_engine
        eng.edit_hierarchy("rows", {"op": "create_group", "name": "g", "members": [0, 1, 2]})
        eng.edit_hierarchy("rows", {"op": "set_collapse", "group": "g", "collapsed": True})
        desc = eng.axis_descriptors()
        assert len(desc["rows"]) == eng.data.implicit.n - 2
        group_entry = next(d for d in desc["rows"] if d["kind"] == "group")
        assert set(group_entry["leaves"]) == {0, 1, 2}


class TestSearchAndDetails:
    def test_search_nodes_edges_documents(self, corpus_engine):
        res = corpus_engine.search("market")
        assert res["edges"] and res["edges"][0]["label"] == "market"
        assert res["total_documents"] == 3
        assert all("span" in d for d in res["documents"])
        cells = res["documents"][0]["cells"]
        assert cells and len(cells[0]) == 3

    def test_search_empty_result_is_valid(self, corpus_engine):
        res = corpus_engine.search("zzzzz")
        assert res["nodes"] == [] and res["documents"] == []

    def test_search_requires_query(self, corpus_engine):
        with pytest.raises(ValueError):
            corpus_engine.search("")

    def test_cell_keywords_and_documents(self, corpus_engine):
        eng = corpus_engine
        # alice (node 0) wrote market docs in 2015 and 2016
        kw = eng.cell_detail(0, 0, "keywords")
        assert kw["keywords"], "expected keywords for a backed cell"
        docs = eng.cell_detail(0, 0, "documents")
        assert docs["total"] >= 1
        assert docs["page_size"] == eng.config.page_size_documents
        timeline = eng.cell_detail(0, 0, "timeline")
        assert len(timeline["history"]) == eng.data.implicit.n_steps

    def test_document_page_budget(self, corpus_engine):
        with pytest.raises(ValueError):
            corpus_engine.cell_detail(0, 0, "documents", page_size=99)


class TestProvenanceIntegration:
    def test_scripted_session_replays_bit_exactly(self, corpus_text, ontology_text, tmp_path):
        log_path = tmp_path / "session.ndjson"
        eng = Engine.from_corpus_text(
            corpus_text, ontology_text, fast_engine_config(), log_path=log_path
        )
        eng.train_model(seed=42)
        eng.request_ordering("rows", "dendrogram", "jaccard", "average")
        v, e = pick_low_zero_cell(eng)
        eng.submit_feedback([(v, e, 1.0, 1)])
        eng.resolve_feedback("accept")
        live_digest = eng.state_digest()
        eng.log.close()

        replayed = Engine.replay(ProvenanceLog.load(log_path))
        assert replayed.state_digest() == live_digest
        assert replayed.committed.preds[0].data.tobytes() == eng.committed.preds[0].data.tobytes()
        assert replayed.active_ordering == eng.active_ordering

    def test_replay_prefix_stops_early(self, synthetic_engine):
        eng = synthetic_engine
        eng.set_threshold(0.3)
        train_seq = next(e.seq for e in eng.log.events if e.kind == "train")
        replayed = Engine.replay(eng.log, up_to=train_seq)
        assert replayed.threshold == replayed.config.cutoff_threshold  # default, not 0.3
        assert replayed.state_digest() == eng.state_digest()

    def test_undo_restores_previous_snapshot(self, synthetic_engine):
        eng = synthetic_engine
        digest_before = eng.state_digest()
        v, e = pick_low_zero_cell(eng)
        eng.submit_feedback([(v, e, 1.0, 3)])
        eng.resolve_feedback("accept")
        assert eng.state_digest() != digest_before
        rewound = eng.undo()  # undoes the accept, back to previewing state
        rewound2 = rewound.undo()  # undoes the preview
        assert rewound2.state_digest() == digest_before

    def test_undo_then_new_action_branches_semantically(self, synthetic_engine):
        eng = synthetic_engine
        eng.set_threshold(0.3)
        threshold_seq = eng.head
        rewound = eng.undo()
        rewound.set_threshold(0.7)
        # the two trails diverge after the shared train prefix
        old_chain = [e.seq for e in eng.log.effective_chain(threshold_seq)]
        new_chain = [e.seq for e in eng.log.effective_chain(rewound.head)]
        assert old_chain[:-1] == new_chain[:-1]
        assert old_chain[-1] != new_chain[-1]
        # the undone trail stays fully replayable (append-only log)
        old_state = Engine.replay(eng.log, up_to=threshold_seq)
        assert old_state.threshold == 0.3
        assert rewound.threshold == 0.7

    def test_nothing_to_undo(self, corpus_text, ontology_text):
        eng = Engine.from_corpus_text(corpus_text, ontology_text, fast_engine_config())
        # only the ingest root exists
        with pytest.raises(TransactionStateError):
            eng.undo()

    def test_every_state_change_records_exactly_one_event(self, synthetic_engine):
        eng = synthetic_engine
        n0 = len(eng.log.events)
        eng.set_threshold(0.25)
        eng.request_ordering("cols", "size")
        eng.edit_hierarchy("rows", {"op": "create_group", "name": "g", "members": [1]})
        eng.mark(0, 0, True)
        eng.annotate({"row": 0}, "note")
        v, e2 = pick_low_zero_cell(eng)
        eng.submit_feedback([(v, e2, 1.0, 3)])
        eng.resolve_feedback("accept")
        assert len(eng.log.events) == n0 + 7
        kinds = [ev.kind for ev in eng.log.events[n0:]]
        assert kinds == [
            "filter-change", "reorder", "hierarchy-edit", "marking",
            "annotation", "feedback-preview", "feedback-accept",
        ]

    def test_replay_checks_result_digests(self, synthetic_engine, monkeypatch):
        eng = synthetic_engine
        train_event = next(e for e in eng.log.events if e.kind == "train")
        train_event.payload["result_digest"] = "tampered"
        train_event_digest_ok = False
        with pytest.raises((ReplayIncompatibility, ValueError)):
            Engine.replay(eng.log)
