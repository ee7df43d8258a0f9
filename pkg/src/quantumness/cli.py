"""Command-line entry point: topology, run, simulate, report, validate."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from . import protocols as pr
from .fidelity import instance_fidelity
from .reporting import (
    ResultsError,
    emit_charts,
    emit_comparison_table,
    emit_estimate_tables,
    latest_per_device,
    load_report,
    write_report,
)
from .simulator import ExecutionRequest, NoiseModel, SimulationError, execute_batch
from .topology import STAGES, QubitPath, TopologyError, enumerate_paths, load_device, partition_rectangles
from .workflow import (
    BackendError,
    ConfigError,
    load_config,
    run_workflow,
)

EXIT_OK, EXIT_CONFIG, EXIT_BACKEND, EXIT_EMPTY = 0, 2, 3, 4
OUT_ENV = "QUANTUMNESS_OUT"
DEFAULT_OUT = "quantumness-out"


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def cmd_topology(args: argparse.Namespace) -> int:
    try:
        topo = load_device(args.device)
    except (TopologyError, OSError, ValueError, KeyError) as exc:
        _err(f"invalid device descriptor: {exc}")
        return EXIT_CONFIG
    # stdout carries only data rows; headers and counts go to stderr
    meta = sys.stderr if (args.paths or args.rectangles) else sys.stdout
    print(f"{topo.name}: {topo.num_qubits} qubits, {topo.kind}", file=meta)
    if not (args.rectangles or args.paths):
        return EXIT_OK
    if topo.all_to_all:
        print("rectangles undefined for all-to-all devices")
        return EXIT_OK
    rects = partition_rectangles(topo)
    if args.rectangles:
        print("index  corners            cycle", file=sys.stderr)
        for r in rects:
            print(f"{r.index:>5}  {' '.join(map(str, r.corners)):<18} {' '.join(map(str, r.cycle))}")
    if args.paths:
        chosen = [r for r in rects if args.rectangle is None or r.index == args.rectangle]
        if not chosen:
            _err(f"no rectangle {args.rectangle}")
            return EXIT_CONFIG
        for r in chosen:
            paths = enumerate_paths(r, args.paths)
            print(f"# rectangle {r.index} {args.paths}: {len(paths)} paths", file=sys.stderr)
            for p in paths:
                print(" ".join(map(str, p.qubits)))
    return EXIT_OK


def _output_dir(args: argparse.Namespace, configured: str | None) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or configured or DEFAULT_OUT)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    out = _output_dir(args, cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "results.jsonl"
    try:
        report = run_workflow(cfg, log_path, resume=args.resume)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except BackendError as exc:
        _err(f"backend error: {exc}")
        return EXIT_BACKEND
    (out / "manifest.json").write_text(
        json.dumps(_manifest_of(log_path), indent=1, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_report(report, out / "report.json")
    emit_charts(report, out / "charts")
    emit_estimate_tables(report, out / "estimates")
    for label, entry in report["protocols"].items():
        print(f"{label:<20} {entry['status']:<8} {len(entry['subchip']):>3} {entry['value']}")
    if report["terminated_early"]:
        _err("terminated early: no survivors after the filtering stage")
        return EXIT_EMPTY
    return EXIT_OK


def _manifest_of(log_path: Path) -> dict:
    with open(log_path, encoding="utf-8") as fh:
        return json.loads(fh.readline())


def _noise_for(spec: str, topo) -> NoiseModel | None:
    if spec == "ideal":
        return None
    if spec == "device":
        return NoiseModel.from_dict(topo.noise or {})
    return NoiseModel.from_dict(json.loads(Path(spec).read_text(encoding="utf-8")))


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        topo = load_device(args.device)
        kind = pr.parse_kind(args.protocol)
        noise = _noise_for(args.noise, topo)
    except (TopologyError, pr.ProtocolError, OSError, ValueError, KeyError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    try:
        inst = _pick_instance(topo, kind, args)
    except (TopologyError, pr.ProtocolError, ValueError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    jobs = inst.circuits()
    try:
        tables = execute_batch(ExecutionRequest([c for _, c in jobs], topo, args.shots, args.seed, noise))
    except (SimulationError, ValueError) as exc:
        _err(f"backend error: {exc}")
        return EXIT_BACKEND
    print(f"{kind.label} on {topo.name}: paths {[list(p.qubits) for p in inst.paths]}")
    for (setting, _), table in zip(jobs, tables):
        print(f"  {setting.label:<12} {json.dumps(table.to_dict(), sort_keys=True)}")
    f, se = instance_fidelity(kind, {s.label: t for (s, _), t in zip(jobs, tables)})
    verdict = "pass" if f >= pr.threshold_for(kind) - 1e-12 else "fail"
    print(f"fidelity {f:.6f} +/- {se:.6f} (threshold {pr.threshold_for(kind):.6f}: {verdict})")
    return EXIT_OK


def _pick_instance(topo, kind: pr.ProtocolKind, args: argparse.Namespace) -> pr.ProtocolInstance:
    path = [int(q) for q in args.path.split(",")] if args.path else None
    if topo.all_to_all:
        qubits = path or list(range(topo.num_qubits))
        if kind.work_qubits == 1 and path is not None:
            if len(path) != 2:
                raise ValueError("an all-to-all path is an ordered pair a,b")
            return pr.ProtocolInstance(kind, "AL", (QubitPath(tuple(path), "AL"),))
        instances = pr.all_to_all_instances(kind, qubits)
        if not instances:
            raise ValueError(f"{kind.label} needs at least {kind.required_qubits} qubits")
        return instances[args.index % len(instances)]
    rects = partition_rectangles(topo)
    if path is not None:
        qp = QubitPath(tuple(path))
        for r in rects:
            if set(path) <= r.qubits:
                for st in STAGES:
                    if qp in [QubitPath(p.qubits) for p in enumerate_paths(r, st)]:
                        return pr.lattice_instance(kind, r, QubitPath(qp.qubits, st))
        raise ValueError(f"path {path} is not a stage path of any rectangle")
    rect = next((r for r in rects if r.index == args.rectangle), None)
    if rect is None:
        raise ValueError(f"no rectangle {args.rectangle}")
    paths = enumerate_paths(rect, args.stage)
    return pr.lattice_instance(kind, rect, paths[args.index % len(paths)])


def cmd_report(args: argparse.Namespace) -> int:
    reports = []
    try:
        for item in args.results:
            p = Path(item)
            reports.append(load_report(p / "report.json" if p.is_dir() else p))
    except (ResultsError, OSError, json.JSONDecodeError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    reports, warnings = latest_per_device(reports)
    for w in warnings:
        print(f"warning: {w}; latest timestamp wins", file=sys.stderr)
    text = emit_comparison_table(reports, args.format)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    print(
        f"ok: device {cfg.device.name} ({cfg.device.kind}), backend {cfg.backend}, "
        f"{len(cfg.protocols)} protocols, shots {cfg.shots}, seed {cfg.seed}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quantumness",
        description="Protocol-based quantumness benchmarking.",
        epilog="exit codes: 0 ok, 2 config error, 3 backend error, 4 early termination (no survivors)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("topology", help="inspect a device: rectangles and stage paths")
    p.add_argument("device", help="builtin name (ibex-like, eagle-like, heron-like) or descriptor path")
    p.add_argument("--rectangles", action="store_true", help="list the rectangles")
    p.add_argument("--paths", choices=STAGES, help="list the paths of this stage")
    p.add_argument("--rectangle", type=int, help="restrict --paths to one rectangle")
    p.set_defaults(func=cmd_topology)

    p = sub.add_parser("run", help="run a workflow from a config file")
    p.add_argument("config", help="workflow config (JSON)")
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV}, config output_dir, or ./{DEFAULT_OUT})")
    p.add_argument("--resume", action="store_true", help="reuse complete stages from an existing results log")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="simulate one protocol instance")
    p.add_argument("device")
    p.add_argument("protocol", help="e.g. transmit, bell, gen_transmit_m2, cat_m3_j2")
    p.add_argument("--path", help="comma-separated qubit path (all-to-all: qubit set for multi-qubit protocols)")
    p.add_argument("--rectangle", type=int, default=1, help="rectangle index on lattice devices")
    p.add_argument("--stage", choices=STAGES, default="c2c", help="stage whose paths are indexed")
    p.add_argument("--index", type=int, default=0, help="which path or camp pairing to use")
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", default="ideal", help="ideal, device, or a noise JSON file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="comparison table from workflow reports")
    p.add_argument("results", nargs="+", help="report.json files or run directories")
    p.add_argument("--format", choices=("csv", "md"), default="md")
    p.add_argument("--output", help="write the table here instead of stdout")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("validate", help="check a workflow config without running it")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "shots", 1) < 1:
        _err("--shots must be positive")
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
