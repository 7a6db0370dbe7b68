"""Command-line front end.

Every flag can also be set through an environment variable named
``CELLSCOPE_<FLAG>`` (upper case, dashes as underscores), e.g.
``CELLSCOPE_SEED=7``. Explicit command-line flags win.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .cellspace import CellSpaceError, get_space, parse_genotype, serialize_genotype, space_cardinality
from .costmodel import ParetoPoint, cost_estimate, get_preset, pareto_front, PRESETS
from .editor import edit_to_compliance
from .importance import DEFAULT_THRESHOLD, OIRecord, aggregate_oi, corpus_importance, important_fractions, reflag
from .pipeline import CorpusError, RunConfig, build_evaluator, dump_report, read_corpus, run_pipeline
from .sampler import GROUPS, ConstraintSet, attest, group_sample, subspace_cardinality
from .surrogate import EvaluatorError, TabularFormatError
from .wilcoxon import EXACT_LIMIT, wilcoxon_signed_rank

ENV_PREFIX = "CELLSCOPE_"
DATA_ERRORS = (CorpusError, CellSpaceError, EvaluatorError, TabularFormatError, OSError, ValueError, KeyError)


class DataError(Exception):
    pass


# ------------------------------------------------------------------ helpers


def _read_text(path):
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return fh.read()
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None


def _write(args, text):
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _dump_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _dump_csv(rows, columns):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in columns})
    return buf.getvalue()


def _genotype_arg(args, spec):
    if args.genotype is not None:
        text = args.genotype
    elif args.input is not None:
        text = _read_text(args.input).strip()
    else:
        raise DataError("give a genotype with --genotype or --input")
    return parse_genotype(text, spec)


def _corpus(args):
    try:
        return read_corpus(io.StringIO(_read_text(args.corpus)), args.space)
    except CorpusError as exc:
        raise DataError(f"{args.corpus}: {exc}") from None


def _run_config(args, **extra):
    return RunConfig(
        space=args.space,
        seed=args.seed,
        threshold=args.threshold,
        min_support=args.min_support,
        max_edges=args.max_edges,
        surrogate=args.surrogate,
        output_format=args.format,
        workers=args.workers,
        **extra,
    )


# ------------------------------------------------------------------ commands


def cmd_space_stats(args):
    spec = get_space(args.space)
    card = space_cardinality(spec)
    groups = {name: subspace_cardinality(spec, c) for name, c in GROUPS.items()}
    out = {
        "space": spec.kind,
        "primitives": list(spec.primitives),
        "cells": card.cells,
        "architectures": card.architectures,
        "architectures_approx": f"{card.architectures:.3g}",
        "group_cells": groups,
    }
    _write(args, _dump_json(out))


def cmd_oi_compute(args):
    spec = get_space(args.space)
    ev = build_evaluator(args.surrogate, args.space)
    rows = _corpus(args)
    cells = args.cells.split(",") if args.cells else None
    records = corpus_importance([a for a, _ in rows], ev, spec, args.threshold, workers=args.workers, cells=cells)
    payload = [r.to_json() for r in records]
    if args.format == "csv":
        _write(args, _dump_csv(payload, list(OIRecord.__dataclass_fields__)))
    else:
        _write(args, _dump_json(payload))


def _load_records(path):
    text = _read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None
    if isinstance(data, dict) and "oi" in data:
        data = data["oi"]["records"]
    if not isinstance(data, list):
        raise DataError(f"{path}: expected a list of OI records")
    return [OIRecord.from_json(r) for r in data]


def cmd_oi_aggregate(args):
    records = _load_records(args.records)
    if args.threshold_override is not None:
        records = reflag(records, args.threshold_override)
    aggs = [a.__dict__ for a in aggregate_oi(records, args.space)]
    if args.format == "csv":
        _write(args, _dump_csv(aggs, list(aggs[0])))
    else:
        _write(args, _dump_json({"aggregates": aggs, "important_fractions": important_fractions(records)}))


def cmd_motifs_mine(args):
    cfg = _run_config(args, top_fraction=args.top_fraction, tail=args.tail, cell=args.cell, repetitions=args.repetitions)
    ev = build_evaluator(args.surrogate, args.space)
    report = run_pipeline(cfg, _corpus(args), ev)
    table = report["motifs"]["table"]
    if args.format == "csv":
        cols = ["code", "edges", "count_target", "count_ref", "support_target", "support_ref", "ratio", "residual"]
        _write(args, _dump_csv(table, cols))
    else:
        _write(args, _dump_json(report["motifs"]))


def cmd_pipeline(args):
    cfg = _run_config(args, top_fraction=args.top_fraction, tail=args.tail, cell=args.cell, repetitions=args.repetitions)
    ev = build_evaluator(args.surrogate, args.space)
    _write(args, dump_report(run_pipeline(cfg, _corpus(args), ev)))


def cmd_sample(args):
    spec = get_space(args.space)
    base = GROUPS[args.group]
    constraints = ConstraintSet(base.skip, base.prim, args.pool_allowed, args.p)
    archs = group_sample(constraints, args.n, spec, np.random.default_rng(args.seed))
    if args.format == "json":
        out = [{"genotype": serialize_genotype(a), "attestation": attest(a, spec, constraints)} for a in archs]
        _write(args, _dump_json(out))
    else:
        _write(args, "".join(serialize_genotype(a) + "\n" for a in archs))


def cmd_edit(args):
    arch = _genotype_arg(args, "darts")
    report = edit_to_compliance(arch, np.random.default_rng(args.seed), args.replacement)
    out = report.to_json()
    out["original"] = serialize_genotype(arch)
    out["edited"] = serialize_genotype(report.edited)
    _write(args, _dump_json(out))


def cmd_cost(args):
    arch = _genotype_arg(args, "darts")
    overrides = {}
    if args.auxiliary:
        overrides["include_auxiliary"] = True
    if args.resolution:
        overrides["input_resolution"] = (args.resolution, args.resolution)
    if args.layers:
        overrides["layers"] = args.layers
    if args.channels:
        overrides["init_channels"] = args.channels
    cfg = get_preset(args.preset, **overrides)
    _write(args, _dump_json(cost_estimate(arch, cfg)))


def _read_points(path):
    rows = list(csv.DictReader(io.StringIO(_read_text(path))))
    need = {"id", "accuracy", "params", "flops"}
    if not rows or not need <= set(rows[0]):
        raise DataError(f"{path}: expected columns id,accuracy,params,flops")
    pts = []
    for line, r in enumerate(rows, start=2):
        try:
            pts.append(ParetoPoint(r["id"], float(r["accuracy"]), float(r["params"]), float(r["flops"])))
        except (TypeError, ValueError):
            raise DataError(f"{path}: line {line}: non-numeric value") from None
    return pts


def cmd_pareto(args):
    front = pareto_front(_read_points(args.input), args.cost)
    rows = [{"id": p.arch_id, "accuracy": p.accuracy, "params": p.params, "flops": p.flops} for p in front]
    if args.format == "json":
        _write(args, _dump_json(rows))
    else:
        _write(args, _dump_csv(rows, ["id", "accuracy", "params", "flops"]))


def cmd_wilcoxon(args):
    rows = list(csv.reader(io.StringIO(_read_text(args.input))))
    pairs = []
    for line, r in enumerate(rows, start=1):
        if not r:
            continue
        try:
            pairs.append((float(r[0]), float(r[1])))
        except (IndexError, ValueError):
            if line == 1:
                continue  # header
            raise DataError(f"{args.input}: line {line}: expected two numbers") from None
    res = wilcoxon_signed_rank(pairs, args.exact_limit)
    _write(args, _dump_json(res.__dict__))


# ------------------------------------------------------------------ parser


def _common(p, randomized=False, surrogate=False, mining=False):
    p.add_argument("--space", default="darts", choices=["darts", "nb201"])
    p.add_argument("-o", "--output", default=None, help="output file (default stdout)")
    p.add_argument("--format", default="json", choices=["json", "csv"])
    if randomized:
        p.add_argument("--seed", type=int, default=0)
    if surrogate:
        p.add_argument("--surrogate", default="synthetic", help="synthetic | tabular:<path> | http:<url>")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    if mining:
        p.add_argument("--corpus", required=True, help="genotype,accuracy CSV or one genotype per line ('-' for stdin)")
        p.add_argument("--min-support", type=float, default=0.05)
        p.add_argument("--max-edges", type=int, default=5)
        p.add_argument("--top-fraction", type=float, default=0.05)
        p.add_argument("--tail", default="top", choices=["top", "bottom"])
        p.add_argument("--cell", default="normal", choices=["normal", "reduce"])
        p.add_argument("--repetitions", type=int, default=10)


def _genotype_flags(p):
    p.add_argument("--genotype", default=None, help="genotype text")
    p.add_argument("--input", default=None, help="file holding a genotype ('-' for stdin)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cellscope", description="Post-hoc analysis of cell-based NAS search spaces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    space = sub.add_parser("space", help="search-space statistics").add_subparsers(dest="action", required=True)
    p = space.add_parser("stats", help="cardinality and constrained subspace sizes")
    _common(p)
    p.set_defaults(func=cmd_space_stats)

    oi = sub.add_parser("oi", help="operation importance").add_subparsers(dest="action", required=True)
    p = oi.add_parser("compute", help="OI records for every operation of every corpus architecture")
    _common(p, surrogate=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--cells", default=None, help="comma-separated subset of normal,reduce")
    p.set_defaults(func=cmd_oi_compute)
    p = oi.add_parser("aggregate", help="per-primitive OI summaries")
    _common(p)
    p.add_argument("--records", required=True, help="JSON list of OI records, or a pipeline report")
    p.add_argument("--threshold", dest="threshold_override", type=float, default=None)
    p.set_defaults(func=cmd_oi_aggregate)

    motifs = sub.add_parser("motifs", help="frequent subgraph analysis").add_subparsers(dest="action", required=True)
    p = motifs.add_parser("mine", help="important subgraphs, null reference, gSpan and ratio ranking")
    _common(p, randomized=True, surrogate=True, mining=True)
    p.set_defaults(func=cmd_motifs_mine)

    p = sub.add_parser("pipeline", help="full analysis report")
    _common(p, randomized=True, surrogate=True, mining=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("sample", help="constrained random architectures")
    p.add_argument("--space", default="darts", choices=["darts", "nb201"])
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--format", default="lines", choices=["lines", "json"])
    p.add_argument("--group", default="random", choices=sorted(GROUPS))
    p.add_argument("-n", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=float, default=0.0, help="probability of a parameterless op (prim groups)")
    p.add_argument("--pool-allowed", action="store_true")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("edit", help="minimal edits to PrimSkip compliance")
    p.add_argument("-o", "--output", default=None)
    _genotype_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replacement", default="kernel", choices=["kernel", "random"])
    p.set_defaults(func=cmd_edit)

    p = sub.add_parser("cost", help="parameter and MAC counts")
    p.add_argument("-o", "--output", default=None)
    _genotype_flags(p)
    p.add_argument("--preset", default="cifar-eval", choices=sorted(PRESETS))
    p.add_argument("--auxiliary", action="store_true", help="include the auxiliary head")
    p.add_argument("--resolution", type=int, default=None)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--channels", type=int, default=None)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("pareto", help="accuracy/cost Pareto front of an id,accuracy,params,flops CSV")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--input", required=True)
    p.add_argument("--cost", default="params", choices=["params", "flops"])
    p.add_argument("--format", default="csv", choices=["json", "csv"])
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("wilcoxon", help="paired signed-rank test on a two-column CSV")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--input", required=True)
    p.add_argument("--exact-limit", type=int, default=EXACT_LIMIT)
    p.set_defaults(func=cmd_wilcoxon)
    return parser


def _truthy(value):
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(value)


def _apply_env(parser, environ):
    """Turn CELLSCOPE_* variables into parser defaults, recursively."""
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for child in action.choices.values():
                _apply_env(child, environ)
            continue
        if not action.option_strings or action.dest in ("help", "version"):
            continue
        long = [o for o in action.option_strings if o.startswith("--")]
        name = (long[0][2:] if long else action.dest).replace("-", "_").upper()
        raw = environ.get(ENV_PREFIX + name)
        if raw is None:
            continue
        try:
            if isinstance(action, argparse._StoreTrueAction):
                value = _truthy(raw)
            else:
                value = action.type(raw) if action.type else raw
                if action.choices is not None and value not in action.choices:
                    raise ValueError(raw)
        except (TypeError, ValueError):
            parser.error(f"bad value {raw!r} in environment variable {ENV_PREFIX + name}")
        action.default = value
        action.required = False


def main(argv=None, environ=None) -> int:
    parser = build_parser()
    _apply_env(parser, os.environ if environ is None else environ)
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (DataError, *DATA_ERRORS) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"cellscope: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
