"""Command-line front door: ingest / train / evaluate / serve / export / replay."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import _accel
from .config import EngineConfig
from .engine import Engine, bundle_from_files
from .predictor import load_snapshot, predict, split_supervision, evaluate, save_snapshot
from .provenance import ProvenanceLog


def _load_config(path: str | None) -> EngineConfig:
    return EngineConfig.load(path) if path else EngineConfig()


def _load_dataset(data_dir: str) -> tuple[dict, EngineConfig]:
    meta_path = Path(data_dir) / "dataset.json"
    if not meta_path.exists():
        sys.exit(f"no dataset.json under {data_dir}; run `hyperscope ingest` first")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    config = EngineConfig.from_dict(meta["engine_config"])
    return meta, config


def cmd_ingest(args: argparse.Namespace) -> None:
    config = _load_config(args.config)
    if args.bin:
        config = EngineConfig.from_dict({**config.to_dict(), "binning": args.bin})
    bundle = bundle_from_files(args.corpus, args.ontology, config.binning)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "source": bundle.source,
        "engine_config": config.to_dict(),
        "n": bundle.implicit.n,
        "m": bundle.implicit.m,
        "timesteps": [t.label for t in bundle.implicit.times],
        "documents": bundle.index.n_documents if bundle.index else 0,
    }
    (out / "dataset.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")
    print(
        f"ingested {meta['documents']} documents: {meta['n']} nodes x {meta['m']} topics "
        f"x {len(meta['timesteps'])} timesteps ({', '.join(meta['timesteps'])})"
    )
    print(f"dataset metadata written to {out / 'dataset.json'}")


def _engine_from_data_dir(data_dir: str, log_name: str | None = None) -> Engine:
    meta, config = _load_dataset(data_dir)
    src = meta["source"]
    log_path = Path(data_dir) / log_name if log_name else None
    return Engine.from_corpus_files(
        src["corpus_path"], src["ontology_path"], config, log_path=log_path
    )


def cmd_train(args: argparse.Namespace) -> None:
    engine = _engine_from_data_dir(args.data_dir, log_name="train.provenance.ndjson")
    if args.config:
        engine.config = EngineConfig.load(args.config)
    state = engine.train_model(seed=args.seed)
    out = Path(args.snapshot_out or Path(args.data_dir) / "model.json")
    save_snapshot(state.params, out)
    trace = state.params.loss_trace
    print(f"trained on backend={_accel.backend()} seed={args.seed}")
    print(f"loss {trace[0]:.6f} -> {trace[-1]:.6f} over {len(trace) - 1} recorded steps")
    try:
        report = engine.evaluate_committed()
        print(f"held-out AUC={report.auc:.4f} recall@{report.threshold}={report.recall:.4f}")
    except ValueError as exc:
        print(f"no evaluation: {exc}")
    print(f"model snapshot written to {out}")


def cmd_evaluate(args: argparse.Namespace) -> None:
    meta, config = _load_dataset(args.data_dir)
    src = meta["source"]
    bundle = bundle_from_files(src["corpus_path"], src["ontology_path"], config.binning)
    params = load_snapshot(args.snapshot)
    implicit = bundle.implicit
    labels = implicit.matrix(implicit.n_steps - 1)
    try:
        _, eval_mask = split_supervision(
            labels, params.config.supervision_fraction, args.mask_seed
        )
        report = evaluate(predict(params), eval_mask, labels, args.threshold)
    except ValueError as exc:
        sys.exit(f"evaluation not possible on this dataset: {exc}")
    print(json.dumps({
        "auc": report.auc,
        "recall": report.recall,
        "threshold": report.threshold,
        "n_pos": report.n_pos,
        "n_neg": report.n_neg,
        "runtime_s": report.runtime_s,
    }, indent=2))


def cmd_serve(args: argparse.Namespace) -> None:
    import uvicorn

    from .service import ServiceState, create_app

    meta, config = _load_dataset(args.data_dir)
    if args.config:
        config = EngineConfig.load(args.config)
    src = meta["source"]
    bundle = bundle_from_files(src["corpus_path"], src["ontology_path"], config.binning)
    state = ServiceState(bundle, config, seed=args.seed, data_dir=args.data_dir)
    app = create_app(state, static_dir=args.static_dir)
    print(f"serving on http://127.0.0.1:{args.port} (kernel backend: {_accel.backend()})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


def cmd_export(args: argparse.Namespace) -> None:
    params = load_snapshot(args.snapshot)
    out = Path(args.out)
    if args.format == "json":
        save_snapshot(params, out)
    elif args.format == "csv":
        pred = predict(params)
        with open(out, "w", encoding="utf-8") as fh:
            fh.write("node,edge,strength\n")
            for i in range(pred.data.shape[0]):
                for j in range(pred.data.shape[1]):
                    fh.write(f"{i},{j},{pred.data[i, j]:.6f}\n")
    else:
        sys.exit(f"unknown export format {args.format!r}")
    print(f"exported {args.format} to {out}")


def cmd_replay(args: argparse.Namespace) -> None:
    log = ProvenanceLog.load(args.log)
    engine = Engine.replay(log, up_to=args.up_to)
    print(f"replayed {len(log.effective_chain(engine.head))} effective events")
    print(f"head={engine.head} snapshot={engine.committed.snapshot_id if engine.committed else None}")
    print(f"state digest: {engine.state_digest()}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperscope",
        description="Temporal-hypergraph exploration engine: prediction, feedback, "
        "seriation, semantic-zoom service, provenance replay.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a corpus + ontology into a dataset directory")
    p.add_argument("--corpus", required=True, help="line-delimited JSON document records")
    p.add_argument("--ontology", required=True, help="JSON topic -> keyword-array mapping")
    p.add_argument("--bin", choices=("year", "month", "week"), default=None)
    p.add_argument("--config", default=None, help="engine config JSON")
    p.add_argument("--out", required=True, help="dataset directory to create")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("train", help="train the link-prediction model")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snapshot-out", default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a model snapshot on held-out cells")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--mask-seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("serve", help="run the HTTP viewport/feedback service")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static-dir", default=None,
                   help="serve the web client from this directory under /app")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("export", help="export a model snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("replay", help="replay a provenance log and report the state digest")
    p.add_argument("--log", required=True)
    p.add_argument("--up-to", type=int, default=None)
    p.set_defaults(fn=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> None:
    args = build_parser().parse_args(argv)
    args.fn(args)


if __name__ == "__main__":
    main()
