"""End-to-end analysis: select the top (or bottom) architectures, compute OI,
mine motifs over important subgraphs against a random null reference."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Optional, Sequence

import numpy as np

from .cellspace import SKIP, CellSpaceError, get_space, parse_genotype, serialize_genotype, to_dag
from .importance import DEFAULT_THRESHOLD, OIRecord, aggregate_oi, corpus_importance, important_fractions
from .motifs import has_residual_link, important_subgraph, mine_frequent, null_reference, ratio_rank, reference_counts
from .surrogate import Evaluator, RemoteSurrogate, SyntheticSurrogate, load_tabular

SCHEMA = "cellscope.report/1"


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    space: str = "darts"
    seed: int = 0
    threshold: float = DEFAULT_THRESHOLD
    min_support: float = 0.05
    max_edges: int = 5
    surrogate: str = "synthetic"
    output_format: str = "json"
    workers: int = 1
    top_fraction: float = 0.05
    tail: str = "top"
    cell: str = "normal"
    repetitions: int = 10
    motif_limit: int = 50

    def __post_init__(self):
        get_space(self.space)
        if not 0 < self.top_fraction <= 1:
            raise ValueError("top_fraction must lie in (0, 1]")
        if self.tail not in ("top", "bottom"):
            raise ValueError("tail must be 'top' or 'bottom'")
        if self.output_format not in ("json", "csv"):
            raise ValueError("output_format must be 'json' or 'csv'")
        if self.workers < 1 or self.repetitions < 1 or self.max_edges < 1:
            raise ValueError("workers, repetitions and max_edges must be positive")
        if not 0 < self.min_support <= 1:
            raise ValueError("min_support must lie in (0, 1]")
        parse_surrogate_descriptor(self.surrogate)


def parse_surrogate_descriptor(desc: str) -> tuple:
    """``synthetic``, ``tabular:<path>`` or ``http:<url>`` -> (kind, argument)."""
    if desc == "synthetic":
        return "synthetic", None
    kind, sep, arg = desc.partition(":")
    if sep and arg and kind == "tabular":
        return "tabular", arg
    if sep and arg and kind in ("http", "https"):
        if arg.startswith("//"):
            return "http", desc
        return "http", arg if arg.startswith(("http://", "https://")) else "http://" + arg
    raise ValueError(f"bad surrogate descriptor {desc!r}; expected synthetic, tabular:<path> or http:<url>")


def build_evaluator(desc: str, space="darts") -> Evaluator:
    kind, arg = parse_surrogate_descriptor(desc)
    spec = get_space(space)
    if kind == "synthetic":
        return SyntheticSurrogate(spec=spec)
    if kind == "tabular":
        try:
            return load_tabular(arg, spec)
        except FileNotFoundError:
            raise CorpusError(f"surrogate table not found: {arg}") from None
    return RemoteSurrogate(arg)


# ------------------------------------------------------------------ corpus


def read_corpus(source, space="darts") -> list:
    """``(genotype, accuracy-or-None)`` rows from a ``genotype,accuracy`` CSV
    or a file of one genotype per line. ``source`` is a path or text stream."""
    spec = get_space(space)
    if isinstance(source, str) or hasattr(source, "__fspath__"):
        with open(source, newline="", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    lines = text.splitlines()
    if not any(line.strip() for line in lines):
        raise CorpusError("empty corpus")
    rows = []
    if lines[0].strip().startswith("genotype"):
        reader = csv.reader(lines)
        header = [h.strip() for h in next(reader)]
        if header[:2] != ["genotype", "accuracy"] and header != ["genotype"]:
            raise CorpusError(f"line 1: expected header genotype[,accuracy], got {','.join(header)}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            acc = None
            if len(row) > 1 and row[1].strip():
                try:
                    acc = float(row[1])
                except ValueError:
                    raise CorpusError(f"line {line}: accuracy {row[1]!r} is not a number") from None
            rows.append((_check_genotype(row[0], spec, line), acc))
    else:
        for line, raw in enumerate(lines, start=1):
            if raw.strip():
                rows.append((_check_genotype(raw.strip(), spec, line), None))
    if not rows:
        raise CorpusError("empty corpus")
    return rows


def _check_genotype(text, spec, line):
    try:
        return parse_genotype(text, spec)
    except CellSpaceError as exc:
        raise CorpusError(f"line {line}: {exc}") from None


# ------------------------------------------------------------------ analysis


def is_residual_pattern(pattern, space="darts") -> bool:
    """Pattern holds a skip edge leaving a cell input (into the output in NB201)."""
    spec = get_space(space)
    labels = pattern.node_labels
    for s, d, lab in pattern.edges():
        if lab == SKIP and labels[s] in ("in0", "in1"):
            if spec.kind == "darts" or labels[d] == "out":
                return True
    return False


def select(entries: Sequence, fraction: float, tail="top") -> list:
    """Indices of the best (or worst) ``fraction`` of ``(arch, accuracy)``
    entries; ties keep corpus order."""
    n = max(1, int(math.floor(fraction * len(entries) + 0.5)))
    sign = -1.0 if tail == "top" else 1.0
    order = sorted(range(len(entries)), key=lambda i: (sign * entries[i][1], i))
    return order[:n]


def run_pipeline(config: RunConfig, corpus: Sequence, evaluator: Optional[Evaluator] = None) -> dict:
    """``corpus`` holds architectures, genotype strings, or ``(either, accuracy)``
    pairs; missing accuracies come from ``evaluator`` (default: the configured
    surrogate)."""
    spec = get_space(config.space)
    if not corpus:
        raise CorpusError("empty corpus")
    ev = evaluator
    entries = []
    for item in corpus:
        arch, acc = item if isinstance(item, tuple) else (item, None)
        if isinstance(arch, str):
            arch = _check_genotype(arch, spec, len(entries) + 1)
        if (arch.reduce is None) == spec.has_reduce:
            raise CorpusError(f"architecture {len(entries)} does not belong to the {spec.kind} space")
        if acc is None:
            ev = ev or build_evaluator(config.surrogate, config.space)
            acc = ev.evaluate(arch)
        entries.append((arch, float(acc)))

    chosen = select(entries, config.top_fraction, config.tail)
    archs = [entries[i][0] for i in chosen]
    ev = ev or build_evaluator(config.surrogate, config.space)
    records = corpus_importance(archs, ev, spec, config.threshold, arch_ids=chosen, workers=config.workers)

    cell_kind = config.cell if spec.has_reduce else "normal"
    by_arch = {}
    for r in records:
        by_arch.setdefault(r.arch_id, []).append(r)
    targets = [important_subgraph(entries[i][0], by_arch[i], cell=cell_kind, spec=spec) for i in chosen]
    rng = np.random.default_rng(config.seed)
    reference = []
    for i, t in zip(chosen, targets):
        full = to_dag(entries[i][0].cell(cell_kind), spec)
        reference.extend(null_reference(full, len(t.op_edges()), rng, config.repetitions))

    T = len(targets)
    mined = mine_frequent(targets, config.min_support, config.max_edges)
    ref_counts = reference_counts([p for p, _ in mined], reference)
    ranked = ratio_rank(mined, ref_counts, T, T * config.repetitions)
    motifs = []
    for s in ranked[: config.motif_limit]:
        row = s.to_json()
        row["residual"] = is_residual_pattern(s.pattern, spec)
        motifs.append(row)

    def prevalence(idx):
        return sum(has_residual_link(entries[i][0].normal, spec).present for i in idx) / len(idx)

    accs = [entries[i][1] for i in chosen]
    return {
        "schema": SCHEMA,
        "config": asdict(config),
        "corpus": {
            "size": len(entries),
            "selected": len(chosen),
            "tail": config.tail,
            "accuracy_min": min(accs),
            "accuracy_max": max(accs),
            "accuracy_mean": math.fsum(accs) / len(accs),
        },
        "selection": [{"id": i, "genotype": serialize_genotype(entries[i][0]), "accuracy": entries[i][1]} for i in chosen],
        "oi": {
            "records": [r.to_json() for r in records],
            "aggregates": [asdict(a) for a in aggregate_oi(records, spec)],
            "important_fractions": important_fractions(records),
        },
        "motifs": {"cell": cell_kind, "frequent": len(mined), "table": motifs},
        "residual": {"corpus": prevalence(range(len(entries))), "selected": prevalence(chosen)},
    }


def dump_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


_SECTIONS = {
    "schema": None,
    "config": {f.name for f in fields(RunConfig)},
    "corpus": {"size", "selected", "tail", "accuracy_min", "accuracy_max", "accuracy_mean"},
    "selection": None,
    "oi": {"records", "aggregates", "important_fractions"},
    "motifs": {"cell", "frequent", "table"},
    "residual": {"corpus", "selected"},
}
_MOTIF_FIELDS = {"code", "nodes", "edges", "count_target", "count_ref", "support_target", "support_ref", "ratio", "rendering", "residual"}


def _exact_keys(obj, expected, where):
    if not isinstance(obj, dict):
        raise ValueError(f"{where}: expected an object")
    extra, missing = set(obj) - expected, expected - set(obj)
    if extra:
        raise ValueError(f"{where}: unknown fields {sorted(extra)}")
    if missing:
        raise ValueError(f"{where}: missing fields {sorted(missing)}")


def load_report(text: str) -> dict:
    """Parse a report, rejecting other schema versions and unknown fields."""
    report = json.loads(text)
    _exact_keys(report, set(_SECTIONS), "report")
    if report["schema"] != SCHEMA:
        raise ValueError(f"unsupported report schema {report['schema']!r}")
    for name, keys in _SECTIONS.items():
        if keys is not None:
            _exact_keys(report[name], keys, name)
    RunConfig(**report["config"])
    for row in report["selection"]:
        _exact_keys(row, {"id", "genotype", "accuracy"}, "selection")
    for rec in report["oi"]["records"]:
        OIRecord.from_json(rec)
    for row in report["motifs"]["table"]:
        _exact_keys(row, _MOTIF_FIELDS, "motifs")
    return report
