"""Batch entry point: single runs, experiment grids, report tables, service.

Exit codes: 0 success, 1 usage error, 2 backend failure, 3 integrity failure.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import records as rec
from .backends.base import BackendConfig, Backends
from .backends.mock import MockLLM
from .bench import (
    PRESETS,
    GridConfig,
    RunConfig,
    Scenario,
    build_scenario,
    enumerate_grid,
)
from .errors import BackendError, ConfigError, IntegrityError, RevstreamError
from .runtime import RunRecord, run_session
from .stats import group_table

EXIT_USAGE = 1
EXIT_BACKEND = 2
EXIT_INTEGRITY = 3


def make_backends(config: RunConfig, scenario: Scenario) -> Backends:
    if config.backend == "mock":
        return Backends.single(MockLLM(scenario))
    if config.backend == "chat":
        from .backends.chat import ChatBackend

        chat = ChatBackend(BackendConfig.from_env("chat"), scenario)
        return Backends.single(chat)
    raise ConfigError(f"unknown backend {config.backend!r}")


def execute_run(config: RunConfig) -> RunRecord:
    scenario = build_scenario(config.scenario, config.rho, config.length_mult)
    backends = make_backends(config, scenario)
    return run_session(config, scenario, backends)


def execute_grid(
    grid: GridConfig, out: Path, workers: int = 4, echo=print
) -> list[RunRecord]:
    """Run a grid, appending line records in enumeration order.

    Reruns skip run ids already present in the output file, so an
    interrupted grid resumes where it stopped.
    """
    configs = enumerate_grid(grid)
    echo(f"grid: {len(configs)} runs")
    done = rec.existing_run_ids(out)
    todo = [c for c in configs if c.run_id not in done]
    if done:
        echo(f"resuming: {len(configs) - len(todo)} runs already on disk")

    results: dict[str, RunRecord] = {}
    if todo:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            for record in pool.map(execute_run, todo):
                results[record.run_id] = record
    ordered = [results[c.run_id] for c in configs if c.run_id in results]
    rec.append_lines(out, (rec.dumps_line(r) for r in ordered))
    echo(f"wrote {len(ordered)} records -> {out}")
    return ordered


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", required=True)
    p.add_argument("--rho", type=float, default=0.25)
    p.add_argument("--policy", default="absorber")
    p.add_argument("--revision", default="substitutive")
    p.add_argument("--timing", default="mid")
    p.add_argument("--injections", type=int, default=1)
    p.add_argument("--length-mult", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", default="mock", choices=("mock", "chat"))
    p.add_argument("--out", type=Path, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revstream")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a single session")
    _add_run_flags(run_p)

    grid_p = sub.add_parser("grid", help="enumerate and execute a run grid")
    grid_p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    grid_p.add_argument("--config", type=Path, default=None, help="grid YAML file")
    grid_p.add_argument("--scenarios", default=None, help="comma list")
    grid_p.add_argument("--rhos", default=None, help="comma list of floats")
    grid_p.add_argument("--revisions", default=None, help="comma list")
    grid_p.add_argument("--policies", default=None, help="comma list")
    grid_p.add_argument("--timings", default=None, help="comma list")
    grid_p.add_argument("--seeds", default=None, help="comma list of ints")
    grid_p.add_argument("--backend", default="mock", choices=("mock", "chat"))
    grid_p.add_argument("--workers", type=int, default=4)
    grid_p.add_argument("--out", type=Path, required=True)

    report_p = sub.add_parser("report", help="aggregate record files into tables")
    report_p.add_argument("--records", type=Path, required=True)
    report_p.add_argument("--group", default="policy")
    report_p.add_argument("--resamples", type=int, default=2000)
    report_p.add_argument("--level", type=float, default=0.95)
    report_p.add_argument("--out", type=Path, default=None)
    report_p.add_argument("--pairwise", action="store_true")

    serve_p = sub.add_parser("serve", help="start the live session service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8008)

    return parser


def cmd_run(args: argparse.Namespace) -> int:
    config = RunConfig(
        scenario=args.scenario,
        rho=args.rho,
        revision_type=args.revision,
        policy=args.policy,
        timing=args.timing,
        n_injections=args.injections,
        length_mult=args.length_mult,
        seed=args.seed,
        backend=args.backend,
    )
    record = execute_run(config)
    out = args.out or Path("runs") / f"{record.run_id}.json"
    rec.write_record(record, out)
    rec.verify_counters(rec.record_to_dict(record))
    print(
        f"run {record.run_id}: policy={config.policy} wasted={record.wasted_acts} "
        f"comp={record.comp_calls} steps={record.steps} quality={record.quality} "
        f"termination={record.termination} -> {out}"
    )
    return EXIT_BACKEND if record.termination == "backend_error" else 0


def cmd_grid(args: argparse.Namespace) -> int:
    if args.preset and args.config:
        raise ConfigError("--preset and --config are mutually exclusive")
    if args.config:
        from .bench import grid_from_file

        grid = grid_from_file(args.config)
    elif args.preset:
        grid = PRESETS[args.preset]
        if args.backend != grid.backend:
            grid = GridConfig(**{**grid.__dict__, "backend": args.backend})
    else:
        base = GridConfig()
        grid = GridConfig(
            scenarios=tuple(args.scenarios.split(",")) if args.scenarios else base.scenarios,
            rhos=tuple(float(x) for x in args.rhos.split(",")) if args.rhos else base.rhos,
            revision_types=tuple(args.revisions.split(",")) if args.revisions else base.revision_types,
            policies=tuple(args.policies.split(",")) if args.policies else base.policies,
            timings=tuple(args.timings.split(",")) if args.timings else base.timings,
            seeds=tuple(int(x) for x in args.seeds.split(",")) if args.seeds else base.seeds,
            backend=args.backend,
        )
    records = execute_grid(grid, args.out, workers=args.workers)
    failed = [r for r in records if r.termination == "backend_error"]
    if failed:
        print(f"{len(failed)} runs failed on the backend", file=sys.stderr)
        return EXIT_BACKEND
    docs = rec.load_jsonl(args.out)
    report = group_table(docs, ["policy"], resamples=200)
    print(report.to_csv(), end="")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    docs = rec.load_jsonl(args.records)
    for doc in docs:
        rec.verify_counters(doc)
    keys = [k.strip() for k in args.group.split(",") if k.strip()]
    report = group_table(docs, keys, resamples=args.resamples, level=args.level)
    text = report.to_csv()
    if args.pairwise:
        text += "\n" + report.pairwise_csv()
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
        print(f"wrote report -> {args.out}")
    else:
        print(text, end="")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "grid":
            return cmd_grid(args)
        if args.command == "report":
            return cmd_report(args)
        if args.command == "serve":
            return cmd_serve(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (IntegrityError, RevstreamError) as exc:
        print(f"integrity error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY


if __name__ == "__main__":
    sys.exit(main())
