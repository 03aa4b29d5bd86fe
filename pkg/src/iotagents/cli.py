"""Command-line surface: ingest, synth, train, predict, hpo, similarity,
cluster, compare-clusters, chat, serve.

Analysis subcommands are thin shells over the orchestrator, so their JSON
outputs are byte-identical to direct library calls with the same seed.
"""

from __future__ import annotations

import argparse
import json
import sys

from .datasets import (
    SchemaError,
    SynthSensorsSpec,
    SynthSeriesSpec,
    load_citypulse_csv,
    load_sensors_csv,
    load_series_csv,
    load_streets_csv,
    synth_sensors,
    synth_series,
)
from .orchestrator import ExecutionError, Orchestrator, TaskPlan
from .store import FileStore, canonical_json, to_jsonable


def _write(path: str | None, text: str) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _payload_json(payload) -> str:
    return canonical_json(to_jsonable(payload.as_dict()))


def _orchestrator(args) -> Orchestrator:
    return Orchestrator(FileStore(args.store), default_seed=args.seed
                        if hasattr(args, "seed") else 0)


def _bound_session(orch: Orchestrator, args, roles) -> object:
    session = orch.create_session()
    for role in roles:
        record = getattr(args, role, None)
        if record:
            orch.bind_dataset(session, role, record)
    return session


def _run_plan(args, intent: str, parameters: dict, roles, out: str | None,
              extra_outputs=None) -> int:
    orch = _orchestrator(args)
    session = _bound_session(orch, args, roles)
    plan = TaskPlan(intent=intent, parameters=parameters)
    result = orch.execute_plan(plan, session)
    payload = orch.render_results(result, plan)
    _write(out, _payload_json(payload))
    if extra_outputs:
        extra_outputs(result)
    return 0


def cmd_ingest(args) -> int:
    store = FileStore(args.store)
    with open(args.csv, encoding="utf-8") as fh:
        text = fh.read()
    import io as _io

    if args.kind == "series":
        value = load_series_csv(_io.StringIO(text), dataset_id=args.id,
                                target=args.target)
        print(store.store(value))
    elif args.kind == "sensors":
        print(store.store(list(load_sensors_csv(_io.StringIO(text)))))
    elif args.kind == "streets":
        table = load_streets_csv(_io.StringIO(text))
        print(store.store({k: frozenset(v) for k, v in table.items()}))
    else:  # citypulse
        dataset, nodes = load_citypulse_csv(_io.StringIO(text), dataset_id=args.id,
                                            target=args.target)
        print(json.dumps({
            "series_record": store.store(dataset),
            "sensors_record": store.store(list(nodes)),
        }))
    return 0


def cmd_synth(args) -> int:
    store = FileStore(args.store)
    if args.kind == "series":
        spec = SynthSeriesSpec(n_points=args.points, seed=args.seed)
        print(store.store(synth_series(spec)))
        return 0
    spec = SynthSensorsSpec(blobs=args.blobs, per_blob=args.per_blob, seed=args.seed)
    nodes, truth = synth_sensors(spec)
    streets = {n.id: n.streets for n in nodes}
    print(json.dumps({
        "sensors_record": store.store(list(nodes)),
        "streets_record": store.store(streets),
        "truth_record": store.store({"labels": truth}),
    }))
    return 0


def cmd_train(args) -> int:
    from .temporal import TrainConfig, save_model, train

    store = FileStore(args.store)
    dataset = store.load(args.series)
    cfg = TrainConfig(epochs=args.epochs, hidden_size=args.hidden, seed=args.seed,
                      window=args.window, batch_size=args.batch_size)
    result = train(dataset, cfg)
    if args.checkpoint:
        save_model(result.model, args.checkpoint)
    summary = {
        "epochs_run": len(result.history),
        "best_epoch": result.best_epoch,
        "final_train_loss": result.history[-1],
        "best_val_loss": result.val_history[result.best_epoch],
        "checkpoint": args.checkpoint,
    }
    _write(args.out, canonical_json(to_jsonable(summary)))
    return 0


def cmd_predict(args) -> int:
    params = {"epochs": args.epochs, "hidden_size": args.hidden, "seed": args.seed}
    if args.date:
        params["date"] = args.date
    return _run_plan(args, "predict", params, ["series"], args.out)


def _parse_genes(specs):
    from .hpo import GeneSpec, ParamCodec

    if not specs:
        return None
    genes = []
    for item in specs:
        try:
            name, lo, hi = item.split(":")
            genes.append(GeneSpec(name, int(lo), int(hi)))
        except ValueError as exc:
            raise SystemExit(f"bad --gene {item!r}; expected name:lo:hi") from exc
    return ParamCodec(genes)


def cmd_hpo(args) -> int:
    from .hpo import PgaConfig, run_pga, write_trace

    codec = _parse_genes(args.genes)
    if args.surrogate:
        cfg = PgaConfig(population=args.pop, islands=args.islands,
                        outer_iterations=args.k1, inner_iterations=args.k2,
                        seed=args.seed)
        target = args.surrogate_target

        def quadratic(params):
            # benchmark over the first declared gene (default hidden_units)
            key = next(iter(params))
            return float((params[key] - target) ** 2)

        result = run_pga(cfg, quadratic, codec)
        if args.trace:
            write_trace(result.trace, args.trace)
        _write(args.out, canonical_json(to_jsonable({
            "best_params": result.best.chromosome.decoded,
            "best_fitness": result.best.fitness,
            "evaluations": result.evaluations,
            "population": cfg.population,
            "islands": cfg.islands,
        })))
        return 0
    if not args.series:
        print("error: hpo requires --series RECORD or --surrogate", file=sys.stderr)
        return 2
    params = {
        "population": args.pop,
        "islands": args.islands,
        "outer_iterations": args.k1,
        "inner_iterations": args.k2,
        "seed": args.seed,
    }
    return _run_plan(args, "hpo", params, ["series"], args.out)


def cmd_similarity(args) -> int:
    params = {"blend": args.blend, "damping": args.damping, "theta": args.theta,
              "seed": args.seed}

    def extras(result):
        if args.matrix_out:
            import numpy as np

            from .spatial import SimilarityMatrix, similarity_to_csv

            sim = SimilarityMatrix(
                values=np.asarray(result.data["matrix"], dtype=float),
                kind="diffused",
                row_ids=tuple(result.data["node_ids"]),
                col_ids=tuple(result.data["node_ids"]),
            )
            with open(args.matrix_out, "w", encoding="utf-8") as fh:
                fh.write(similarity_to_csv(sim))

    return _run_plan(args, "similarity", params, ["sensors"], args.out, extras)


def cmd_cluster(args) -> int:
    params = {"seed": args.seed}
    if args.k:
        params["k"] = args.k

    def extras(result):
        if args.labels_out:
            _write(args.labels_out, canonical_json(to_jsonable({
                "labels": result.data["labels"],
                "node_ids": result.data["node_ids"],
                "k": result.data["k"],
                "report": result.data["metrics"],
            })))

    return _run_plan(args, "cluster", params, ["sensors"], args.out, extras)


def cmd_compare(args) -> int:
    params = {"seed": args.seed}
    if args.k:
        params["k"] = args.k
    if args.view == "features":
        params["view"] = "features"
    return _run_plan(args, "compare_clusters", params, ["sensors", "streets"],
                     args.out)


def cmd_chat(args) -> int:
    orch = _orchestrator(args)
    session = _bound_session(orch, args, ["series", "sensors", "streets"])
    stream = sys.stdin
    print("iotagents chat (rule parser). Empty line or EOF exits.")
    for line in stream:
        text = line.strip()
        if not text:
            break
        try:
            round_ = orch.run_round(session, text)
        except ExecutionError as exc:
            print(f"error: {exc}")
            continue
        if round_.plan is None:
            print(round_.result_summary.get("clarification", ""))
            continue
        for payload in round_.payloads:
            print(payload.narrative)
            if args.payload_dir:
                import os

                idx = len(session.rounds) - 1
                path = os.path.join(args.payload_dir, f"round-{idx}.json")
                _write(path, _payload_json(payload))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(store_root=args.store, llm_endpoint=args.llm_endpoint,
                           default_seed=args.seed, workers=args.workers)
    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iotagents",
        description="IoT time-series analysis agents: forecasting, graph "
        "similarity, clustering, and a chat-style orchestrator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_store(p):
        p.add_argument("--store", default="./iotagents-store",
                       help="file-store root directory")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ingest", help="load a CSV into the store")
    p.add_argument("--kind", choices=["series", "sensors", "streets", "citypulse"],
                   required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--id", default="uploaded")
    p.add_argument("--target", default=None)
    add_store(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate synthetic data into the store")
    p.add_argument("--kind", choices=["series", "sensors"], required=True)
    p.add_argument("--points", type=int, default=2000)
    p.add_argument("--blobs", type=int, default=3)
    p.add_argument("--per-blob", type=int, default=8, dest="per_blob")
    add_store(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a forecaster on a stored series")
    p.add_argument("--series", required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--window", type=int, default=12)
    p.add_argument("--batch-size", type=int, default=200, dest="batch_size")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--out", default=None)
    add_store(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="train briefly and plot test forecasts")
    p.add_argument("--series", required=True)
    p.add_argument("--epochs", type=int, default=25)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--date", default=None)
    p.add_argument("--out", default=None)
    add_store(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("hpo", help="island-model hyperparameter search")
    p.add_argument("--series", default=None)
    p.add_argument("--surrogate", action="store_true",
                   help="optimize the built-in quadratic benchmark instead of "
                   "training models")
    p.add_argument("--surrogate-target", type=int, default=137,
                   dest="surrogate_target")
    p.add_argument("--gene", action="append", dest="genes", default=None,
                   metavar="NAME:LO:HI",
                   help="hyperparameter range (repeatable); default "
                   "hidden_units:1:512")
    p.add_argument("--islands", type=int, default=2)
    p.add_argument("--pop", type=int, default=12)
    p.add_argument("--k1", type=int, default=10)
    p.add_argument("--k2", type=int, default=10)
    p.add_argument("--trace", default=None, help="write JSONL trace here")
    p.add_argument("--out", default=None)
    add_store(p)
    p.set_defaults(func=cmd_hpo)

    p = sub.add_parser("similarity", help="diffused sensor similarity network")
    p.add_argument("--sensors", required=True)
    p.add_argument("--blend", type=float, default=0.5)
    p.add_argument("--damping", type=float, default=0.8)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--out", default=None)
    p.add_argument("--matrix-out", default=None, dest="matrix_out",
                   help="write the diffused matrix as CSV with id headers")
    add_store(p)
    p.set_defaults(func=cmd_similarity)

    p = sub.add_parser("cluster", help="spectral clustering of stored sensors")
    p.add_argument("--sensors", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--labels-out", default=None, dest="labels_out")
    add_store(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("compare-clusters", help="inter-cluster similarity heatmap")
    p.add_argument("--sensors", required=True)
    p.add_argument("--streets", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--view", choices=["matrix", "features"], default="matrix")
    p.add_argument("--out", default=None)
    add_store(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("chat", help="interactive REPL over the rule parser")
    p.add_argument("--series", default=None)
    p.add_argument("--sensors", default=None)
    p.add_argument("--streets", default=None)
    p.add_argument("--payload-dir", default=None, dest="payload_dir")
    add_store(p)
    p.set_defaults(func=cmd_chat)

    import os as _os

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int,
                   default=int(_os.environ.get("IOTAGENTS_PORT", "8080")))
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--llm-endpoint", default=None, dest="llm_endpoint")
    add_store(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, ExecutionError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
