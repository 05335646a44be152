"""`rig` command line: suite generation, benchmark runs, reports, policy tools."""

from __future__ import annotations

import argparse
import sys

import yaml

from .dsl import ParseError, check_source, parse_program, pretty_print, start_execution
from .dsl.interpreter import Faulted, Finished, Yielded
from .harness import RunConfig, SuiteReport, render_report, run_suite
from .memory import MemoryStore
from .scenario import generate_suite, save_suite
from .sensing import snapshot_from_dict


def _backend_spec(args: argparse.Namespace) -> dict | None:
    if args.agent != "dsl":
        return None
    if args.backend == "scripted":
        return {"kind": "scripted"}
    if args.backend == "replay":
        if not args.replay_path:
            raise SystemExit("--replay-path is required with --backend replay")
        return {"kind": "replay", "path": args.replay_path}
    if args.backend == "remote":
        if not args.remote_url:
            raise SystemExit("--remote-url is required with --backend remote")
        return {
            "kind": "remote",
            "url": args.remote_url,
            "model": args.remote_model,
            "timeout": args.remote_timeout,
        }
    raise SystemExit(f"unknown backend {args.backend!r}")


def cmd_gen_suite(args: argparse.Namespace) -> int:
    suite = generate_suite(args.seed, args.total)
    save_suite(suite, args.out)
    print(f"wrote {len(suite)} scenarios to {args.out}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = RunConfig(
        suite_path=args.suite,
        agent=args.agent,
        backend=_backend_spec(args),
        shots=args.shots,
        feedback=args.feedback,
        parallelism=args.parallelism,
        output_dir=args.out,
        memory_dir=args.memory_dir,
        user=args.user,
        strict=args.strict,
    )
    report = run_suite(config)
    print(render_report(report, style=args.style))
    if args.strict and report.aggregates.get("collision_rate", 0) > 0:
        print("strict mode: collisions occurred", file=sys.stderr)
        return 2
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    with open(args.report, "r", encoding="utf-8") as fh:
        report = SuiteReport.from_json(fh.read())
    baseline = None
    if args.baseline:
        with open(args.baseline, "r", encoding="utf-8") as fh:
            baseline = SuiteReport.from_json(fh.read())
    print(render_report(report, style=args.style, baseline=baseline))
    return 0


def _load_snapshot(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise SystemExit(f"{path} does not contain a snapshot mapping")
    return data


def cmd_lmp_check(args: argparse.Namespace) -> int:
    with open(args.program, "r", encoding="utf-8") as fh:
        source = fh.read()
    snapshot = snapshot_from_dict(_load_snapshot(args.snapshot))
    _, verdict = check_source(source, snapshot)
    status = "accepted" if verdict.accepted else f"rejected at {verdict.stage}: {verdict.reason}"
    print(status)
    return 0 if verdict.accepted else 1


def cmd_lmp_run(args: argparse.Namespace) -> int:
    with open(args.program, "r", encoding="utf-8") as fh:
        source = fh.read()
    try:
        program = parse_program(source)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    with open(args.snapshots, "r", encoding="utf-8") as fh:
        snapshots = [snapshot_from_dict(doc) for doc in yaml.safe_load_all(fh) if doc]
    handle = start_execution(program)
    for i, snapshot in enumerate(snapshots):
        result = handle.resume(snapshot)
        if isinstance(result, Yielded):
            params = " ".join(f"{k}={v}" for k, v in result.intent.params.items())
            print(f"resume {i}: yield {result.intent.kind}({params})")
        elif isinstance(result, Finished):
            print(f"resume {i}: finished")
            return 0
        elif isinstance(result, Faulted):
            print(f"resume {i}: faulted: {result.reason}")
            return 1
    return 0


def cmd_lmp_fmt(args: argparse.Namespace) -> int:
    with open(args.program, "r", encoding="utf-8") as fh:
        source = fh.read()
    try:
        program = parse_program(source)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 1
    formatted = pretty_print(program)
    if args.write:
        with open(args.program, "w", encoding="utf-8") as fh:
            fh.write(formatted)
    else:
        print(formatted, end="")
    return 0


def cmd_memory_export(args: argparse.Namespace) -> int:
    store = MemoryStore(args.dir)
    lines = store.export_lines(args.user)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + ("\n" if lines else ""))
        print(f"exported {len(lines)} records to {args.out}")
    else:
        for line in lines:
            print(line)
    return 0


def cmd_memory_import(args: argparse.Namespace) -> int:
    store = MemoryStore(args.dir)
    with open(args.infile, "r", encoding="utf-8") as fh:
        count = store.import_lines(args.user, fh.readlines())
    print(f"imported {count} records for {args.user}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    app = create_app(
        ServiceConfig(
            suite_path=args.suite,
            memory_dir=args.memory_dir,
            pace=args.pace,
        )
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rig", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-suite", help="generate a seeded scenario suite")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--total", type=int, default=490)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_suite)

    p = sub.add_parser("run", help="run an agent over a suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--agent", choices=["idm", "mobil", "oracle", "dsl"], default="idm")
    p.add_argument("--backend", choices=["scripted", "replay", "remote"], default="scripted")
    p.add_argument("--replay-path")
    p.add_argument("--remote-url")
    p.add_argument("--remote-model", default="default")
    p.add_argument("--remote-timeout", type=float, default=30.0)
    p.add_argument("--shots", type=int, choices=[0, 3], default=0)
    p.add_argument("--feedback", action="store_true")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--memory-dir")
    p.add_argument("--user", default="bench")
    p.add_argument("--style", choices=["table", "lines"], default="table")
    p.add_argument("--strict", action="store_true",
                   help="exit nonzero when any collision occurs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="render a stored report")
    p.add_argument("--report", required=True)
    p.add_argument("--baseline")
    p.add_argument("--style", choices=["table", "lines"], default="table")
    p.set_defaults(func=cmd_report)

    lmp = sub.add_parser("lmp", help="policy program tools")
    lmp_sub = lmp.add_subparsers(dest="lmp_command", required=True)
    p = lmp_sub.add_parser("check", help="parse and gate a program against a snapshot")
    p.add_argument("--program", required=True)
    p.add_argument("--snapshot", required=True)
    p.set_defaults(func=cmd_lmp_check)
    p = lmp_sub.add_parser("run", help="execute a program against a snapshot stream")
    p.add_argument("--program", required=True)
    p.add_argument("--snapshots", required=True)
    p.set_defaults(func=cmd_lmp_run)
    p = lmp_sub.add_parser("fmt", help="pretty-print a program")
    p.add_argument("--program", required=True)
    p.add_argument("--write", action="store_true")
    p.set_defaults(func=cmd_lmp_fmt)

    mem = sub.add_parser("memory", help="memory store import/export")
    mem_sub = mem.add_subparsers(dest="memory_command", required=True)
    p = mem_sub.add_parser("export")
    p.add_argument("--dir", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_memory_export)
    p = mem_sub.add_parser("import")
    p.add_argument("--dir", required=True)
    p.add_argument("--user", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.set_defaults(func=cmd_memory_import)

    p = sub.add_parser("serve", help="start the cockpit service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--suite")
    p.add_argument("--memory-dir")
    p.add_argument("--pace", type=float, default=10.0)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
