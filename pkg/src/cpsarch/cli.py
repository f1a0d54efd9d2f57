"""``cpsarch`` command line: analysis, graphing, monitoring and falsification.

Exit status is 0 on success and 2 on any usage or input error; diagnostics
go to stderr, data to stdout or ``-o``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .catalog import resolve_catalog
from .errors import CpsArchError, SchemaError, UnknownSignal
from .falsify import (
    AnnealingSchedule,
    CampaignResult,
    InputChannel,
    InputSpec,
    Interpolation,
    default_input_spec,
    run_campaign,
)
from .flowgraph import build_flow_graph, emit_dot, emit_json
from .ingest import load_model
from .metrics import (
    MetricsReport,
    aggregate_corpus,
    analyze,
    corpus_to_csv,
    corpus_to_json,
    difference,
    difference_to_csv,
    difference_to_json,
    report_to_csv,
    report_to_json,
)
from .stl import builtin_requirements, check, parse_stl, signals_of, trace_from_csv
from .sut import resolve_sut

EXIT_OK = 0
EXIT_ERROR = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors already; keep that and nothing else."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _write(data: bytes, out: str | None):
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def _read_json(path: Path):
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from None


# --- subcommands --------------------------------------------------------


def cmd_analyze(args) -> int:
    table = resolve_catalog(args.catalog)
    report = analyze(load_model(args.model), table)
    _write(report_to_csv(report) if args.format == "csv" else report_to_json(report), args.output)
    return EXIT_OK


def cmd_compare(args) -> int:
    table = resolve_catalog(args.catalog)
    diff = difference(load_model(args.ai), load_model(args.traditional), table)
    _write(difference_to_csv(diff) if args.format == "csv" else difference_to_json(diff), args.output)
    return EXIT_OK


def _corpus_rows(manifest: Path, table):
    doc = _read_json(manifest)
    if not isinstance(doc, dict) or "systems" not in doc:
        raise SchemaError(f"{manifest}: manifest needs a 'systems' list")
    mode = doc.get("mode", "models")
    base = manifest.parent
    rows = []
    for entry in doc["systems"]:
        try:
            sid, trad, ai = entry["id"], entry["traditional"], entry["ai"]
        except (KeyError, TypeError):
            raise SchemaError(f"{manifest}: each system needs 'id', 'traditional' and 'ai'") from None
        if mode == "values":
            try:
                rows.append((sid, MetricsReport.from_values(trad), MetricsReport.from_values(ai)))
            except (KeyError, TypeError) as exc:
                raise SchemaError(f"{manifest}: system {sid!r}: {exc}") from None
        elif mode == "models":
            rows.append((sid, analyze(load_model(base / trad), table), analyze(load_model(base / ai), table)))
        else:
            raise SchemaError(f"{manifest}: unknown mode {mode!r}")
    return rows


def cmd_corpus(args) -> int:
    table = resolve_catalog(args.catalog)
    agg = aggregate_corpus(_corpus_rows(Path(args.manifest), table))
    _write(corpus_to_json(agg) if args.format == "json" else corpus_to_csv(agg), args.output)
    return EXIT_OK


def cmd_graph(args) -> int:
    table = resolve_catalog(args.catalog)
    graph = build_flow_graph(load_model(args.model), table, args.relevant_only, args.exclude_ports)
    data = emit_json(graph) if args.format == "json" else emit_dot(graph, args.penwidth_per_unit)
    _write(data, args.output)
    return EXIT_OK


def cmd_stl_check(args) -> int:
    trace = trace_from_csv(Path(args.trace).read_bytes())
    if args.req:
        reqs = builtin_requirements()
        if args.req not in reqs:
            raise UnknownSignal(f"unknown requirement {args.req!r}; known: {', '.join(reqs)}")
        label, phi = args.req, reqs[args.req].formula
    else:
        label, phi = args.formula, parse_stl(args.formula, tuple(trace.values))
    missing = sorted(signals_of(phi) - set(trace.values))
    if missing:
        raise UnknownSignal(f"trace lacks signal(s): {', '.join(missing)}")
    result = check(phi, trace)
    if args.format == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(
            [["requirement", "robustness", "verdict"], [label, repr(result.robustness), result.verdict.value]]
        )
        data = buf.getvalue().encode()
    else:
        doc = {"requirement": label, "robustness": result.robustness, "verdict": result.verdict.value}
        data = (json.dumps(doc, indent=2) + "\n").encode()
    _write(data, args.output)
    return EXIT_OK


def _input_spec(cfg, sut) -> InputSpec:
    items = cfg.get("inputs")
    if items is None:
        return default_input_spec(sut)
    channels = []
    for item in items:
        name = item["name"]
        if name not in sut.input_ranges:
            raise UnknownSignal(f"{sut.name} has no input {name!r}")
        lo, hi = item.get("range", sut.input_ranges[name])
        channels.append(
            InputChannel(
                name,
                float(lo),
                float(hi),
                int(item.get("control_points", 4)),
                Interpolation(item.get("interpolation", "linear")),
            )
        )
    return InputSpec(tuple(channels))


def _schedule(cfg, args) -> AnnealingSchedule:
    s = dict(cfg.get("schedule", {}))
    if args.max_iterations is not None:
        s["max_iterations"] = args.max_iterations
    if args.seed is not None:
        s["rng_seed"] = args.seed
    return AnnealingSchedule(**s)


def _campaign_doc(sut_name: str, req_label: str, camp: CampaignResult, timing: bool) -> dict:
    doc = {
        "model": sut_name,
        "requirement": req_label,
        "executions": len(camp.executions),
        "violated_executions": camp.violated_executions,
        "falsified": camp.falsified,
        "mean_iterations_to_violation": camp.mean_iterations_to_violation,
        "mean_iterations": camp.mean_iterations,
        "runs": [
            {
                "seed": r.seed,
                "verdict": r.verdict.value,
                "best_robustness": r.best_robustness,
                "iterations_used": r.iterations_used,
                "best_input": [list(map(float, ch)) for ch in r.best_input],
            }
            for r in camp.executions
        ],
    }
    if timing:
        doc["avg_time"] = camp.avg_time
    return doc


def _campaign_csv(doc: dict, timing: bool) -> bytes:
    header = ["Model", "Requirement", "Executions", "Violated", "Falsified", "Mean iterations to violation"]
    mean = doc["mean_iterations_to_violation"]
    row = [
        doc["model"],
        doc["requirement"],
        doc["executions"],
        doc["violated_executions"],
        "yes" if doc["falsified"] else "no",
        "" if mean is None else repr(mean),
    ]
    if timing:
        header.append("Avg time (s)")
        row.append(f"{doc['avg_time']:.4f}")
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows([header, row])
    return buf.getvalue().encode()


def cmd_falsify(args) -> int:
    path = Path(args.config)
    cfg = _read_json(path)
    try:
        sut = resolve_sut(cfg["sut"], path.parent)
        if "requirement" in cfg:
            reqs = builtin_requirements()
            if cfg["requirement"] not in reqs:
                raise UnknownSignal(f"unknown requirement {cfg['requirement']!r}")
            label, phi = cfg["requirement"], reqs[cfg["requirement"]].formula
        else:
            label, phi = cfg["stl"], parse_stl(cfg["stl"], sut.outputs)
        spec = _input_spec(cfg, sut)
        schedule = _schedule(cfg, args)
        executions = args.executions if args.executions is not None else int(cfg.get("executions", 30))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: bad campaign config: {exc}") from None
    try:
        camp = run_campaign(sut, phi, spec, schedule, executions)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None
    doc = _campaign_doc(sut.name, label, camp, args.timing)
    data = _campaign_csv(doc, args.timing) if args.format == "csv" else (json.dumps(doc, indent=2) + "\n").encode()
    _write(data, args.output)
    print(
        f"{sut.name} {label}: {camp.violated_executions}/{executions} executions violated, "
        f"avg time {camp.avg_time:.3f} s",
        file=sys.stderr,
    )
    return EXIT_OK


# --- parser -------------------------------------------------------------


def _common(p, formats, default):
    p.add_argument("--format", choices=formats, default=default, help=f"output format (default {default})")
    p.add_argument("-o", "--output", help="write to this file instead of stdout")


def _catalog(p):
    p.add_argument(
        "--catalog",
        help="block catalog JSON (default: $CPSARCH_CATALOG, else the shipped catalog)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cpsarch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="block/connection counts and hierarchical depth of one model")
    p.add_argument("model", help="model file (.json or .slx)")
    _catalog(p)
    _common(p, ("json", "csv"), "json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="per-type and per-category block differences, AI minus traditional")
    p.add_argument("ai", help="AI-variant model")
    p.add_argument("traditional", help="traditional-variant model")
    _catalog(p)
    _common(p, ("json", "csv"), "json")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("corpus", help="averages and %% differences over a manifest of paired systems")
    p.add_argument("manifest", help="manifest JSON; mode 'models' (paths) or 'values' (metric numbers)")
    _catalog(p)
    _common(p, ("csv", "json"), "csv")
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("graph", help="type-level flow graph as Graphviz DOT or JSON")
    p.add_argument("model", help="model file (.json or .slx)")
    p.add_argument("--relevant-only", action="store_true", help="keep connections touching a relevant block type")
    p.add_argument("--exclude-ports", action="store_true", help="drop Inport/Outport blocks and their connections")
    p.add_argument("--penwidth-per-unit", type=float, default=1.0, help="DOT edge pen width per unit weight")
    _catalog(p)
    _common(p, ("dot", "json"), "dot")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("stl-check", help="robustness of a requirement over a trace CSV")
    p.add_argument("trace", help="CSV with header time,<signal>...")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--req", help="builtin requirement id (e.g. SC, WT2, AFC27)")
    g.add_argument("--formula", help="inline STL formula over the trace's signals")
    _common(p, ("json", "csv"), "json")
    p.set_defaults(func=cmd_stl_check)

    p = sub.add_parser("falsify", help="run a simulated-annealing falsification campaign")
    p.add_argument("config", help="campaign config JSON")
    p.add_argument("--executions", type=int, help="override the number of executions")
    p.add_argument("--max-iterations", type=int, help="override iterations per execution")
    p.add_argument("--seed", type=int, help="override the first execution's seed")
    p.add_argument("--timing", action="store_true", help="include mean wall time (makes output non-reproducible)")
    _common(p, ("json", "csv"), "json")
    p.set_defaults(func=cmd_falsify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CpsArchError as exc:
        print(f"cpsarch {args.command}: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"cpsarch {args.command}: {exc}", file=sys.stderr)
    except Exception as exc:  # noqa: BLE001 - every failure maps to exit 2
        print(f"cpsarch {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
