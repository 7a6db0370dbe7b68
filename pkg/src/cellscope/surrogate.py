"""Performance evaluators y(arch) and path encodings for external predictors."""
from __future__ import annotations

import abc
import csv
import math
import os
import threading
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, Optional

import httpx
import numpy as np

from .cellspace import (
    DARTS,
    POOLS,
    SEP_CONVS,
    ZERO,
    Architecture,
    Cell,
    CellSpaceError,
    SpaceSpec,
    get_space,
    parse_genotype,
    serialize_genotype,
)
from .motifs.residual import has_residual_link


class EvaluatorError(RuntimeError):
    pass


class SurrogateMiss(EvaluatorError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "architecture not in table"


class TransportFailure(EvaluatorError):
    pass


class DisabledOperationError(EvaluatorError):
    pass


class TabularFormatError(ValueError):
    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line


class Evaluator(abc.ABC):
    """Maps an architecture to an accuracy in [0, 1]."""

    deterministic = True

    @abc.abstractmethod
    def _predict(self, arch: Architecture) -> float:
        ...

    def evaluate(self, arch: Architecture) -> float:
        for kind, cell in arch.cells():
            if ZERO in cell.ops():
                raise DisabledOperationError(f"{kind} cell has disabled operations; every operation must be enabled")
        acc = float(self._predict(arch))
        if not 0.0 <= acc <= 1.0 or math.isnan(acc):
            raise EvaluatorError(f"accuracy {acc} outside [0, 1]")
        return acc

    __call__ = evaluate


def evaluate(ev: Evaluator, arch: Architecture) -> float:
    return ev.evaluate(arch)


class ConstantEvaluator(Evaluator):
    def __init__(self, value: float):
        self.value = float(value)

    def _predict(self, arch):
        return self.value


class FunctionEvaluator(Evaluator):
    """Wrap a plain callable ``arch -> accuracy``."""

    def __init__(self, fn, deterministic=True):
        self.fn = fn
        self.deterministic = deterministic

    def _predict(self, arch):
        return self.fn(arch)


# ---------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class SyntheticCoefficients:
    base: float = 0.90
    residual_bonus: float = 0.03
    sep_slope: float = 0.02
    pool_penalty: float = 0.02
    reduce_sep_slope: float = 0.005


class SyntheticSurrogate(Evaluator):
    """Deterministic closed-form benchmark.

    acc = base + residual_bonus * [normal cell has an input skip]
          + sep_slope * n_sep(normal) / E - pool_penalty * n_pool(normal) / E
          + reduce_sep_slope * n_sep(reduce) / E

    clamped to [0, 1], with E the number of edges per cell. In NB201 mode the
    convolutions play the role of separable convolutions.
    """

    def __init__(self, coefficients: SyntheticCoefficients = SyntheticCoefficients(), spec: SpaceSpec = DARTS):
        self.coefficients = coefficients
        self.spec = get_space(spec)

    def _predict(self, arch):
        c = self.coefficients
        spec = self.spec
        convs = SEP_CONVS if spec.kind == "darts" else ("nor_conv_1x1", "nor_conv_3x3")
        n = spec.edges_per_cell
        acc = c.base
        if has_residual_link(arch.normal, spec).present:
            acc += c.residual_bonus
        acc += c.sep_slope * arch.count(convs) / n
        acc -= c.pool_penalty * arch.count(POOLS) / n
        if arch.reduce is not None:
            acc += c.reduce_sep_slope * arch.count(convs, "reduce") / n
        return min(1.0, max(0.0, acc))


# ---------------------------------------------------------------- tabular


class TabularSurrogate(Evaluator):
    """Lookup table keyed by canonical genotype text."""

    def __init__(self, entries: Mapping[str, float], stddev: Optional[Mapping[str, float]] = None, spec: SpaceSpec = DARTS, name=None):
        self.spec = get_space(spec)
        self.entries = dict(entries)
        self.stddevs = dict(stddev or {})
        self.name = name
        for key, acc in self.entries.items():
            if not 0.0 <= acc <= 1.0:
                raise ValueError(f"accuracy {acc} for {key} outside [0, 1]")

    def __len__(self):
        return len(self.entries)

    def __contains__(self, arch):
        return serialize_genotype(arch) in self.entries

    def _predict(self, arch):
        key = serialize_genotype(arch)
        try:
            return self.entries[key]
        except KeyError:
            where = f" ({self.name})" if self.name else ""
            raise SurrogateMiss(f"no table entry{where} for {key}") from None

    def stddev(self, arch) -> Optional[float]:
        return self.stddevs.get(serialize_genotype(arch))


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8"), str(source)
    return source, getattr(source, "name", None)


def _read_rows(source):
    fh, name = _open_text(source)
    try:
        rows = list(csv.reader(fh))
    finally:
        if fh is not source:
            fh.close()
    return rows, name


def _canonical_key(text, spec, line):
    try:
        return serialize_genotype(parse_genotype(text, spec))
    except CellSpaceError as exc:
        raise TabularFormatError(line, f"bad genotype: {exc}") from None


def _parse_accuracy(value, line, column="accuracy"):
    try:
        acc = float(value)
    except ValueError:
        raise TabularFormatError(line, f"{column} {value!r} is not a number") from None
    if not 0.0 <= acc <= 1.0:
        raise TabularFormatError(line, f"{column} {acc} outside [0, 1]")
    return acc


def load_tabular(source, spec: SpaceSpec = DARTS) -> TabularSurrogate:
    """Read a ``genotype,accuracy[,stddev]`` CSV (path or text stream)."""
    spec = get_space(spec)
    rows, name = _read_rows(source)
    if not rows:
        raise TabularFormatError(1, "empty file")
    header = [h.strip() for h in rows[0]]
    if header not in (["genotype", "accuracy"], ["genotype", "accuracy", "stddev"]):
        raise TabularFormatError(1, f"expected header genotype,accuracy[,stddev], got {','.join(header)}")
    entries, stds, first_seen = {}, {}, {}
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise TabularFormatError(line, f"expected {len(header)} fields, got {len(row)}")
        key = _canonical_key(row[0], spec, line)
        if key in entries:
            raise TabularFormatError(line, f"duplicate genotype (first seen on line {first_seen[key]})")
        entries[key] = _parse_accuracy(row[1], line)
        first_seen[key] = line
        if len(row) == 3 and row[2].strip():
            try:
                stds[key] = float(row[2])
            except ValueError:
                raise TabularFormatError(line, f"stddev {row[2]!r} is not a number") from None
    return TabularSurrogate(entries, stds, spec, name=name)


def load_tabular_columns(source, spec: SpaceSpec = DARTS) -> dict:
    """Read a ``genotype,<dataset>,<dataset>...`` CSV into one table per column."""
    spec = get_space(spec)
    rows, name = _read_rows(source)
    if not rows or len(rows[0]) < 2 or rows[0][0].strip() != "genotype":
        raise TabularFormatError(1, "expected header genotype,<column>[,<column>...]")
    columns = [h.strip() for h in rows[0][1:]]
    tables = {c: {} for c in columns}
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(columns) + 1:
            raise TabularFormatError(line, f"expected {len(columns) + 1} fields, got {len(row)}")
        key = _canonical_key(row[0], spec, line)
        for col, value in zip(columns, row[1:]):
            if key in tables[col]:
                raise TabularFormatError(line, "duplicate genotype")
            tables[col][key] = _parse_accuracy(value, line, col)
    return {c: TabularSurrogate(t, spec=spec, name=f"{name}:{c}" if name else c) for c, t in tables.items()}


# ---------------------------------------------------------------- remote


class RemoteSurrogate(Evaluator):
    """Client for a prediction service: ``POST /predict {"genotype": ...}``.

    At most ``max_in_flight`` requests are outstanding at any time across
    threads. Transport errors and 5xx responses are retried; the request is
    a pure query so retrying is safe.
    """

    deterministic = False

    def __init__(self, base_url: str, max_in_flight=4, retries=2, timeout=30.0, transport=None):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be positive")
        self.base_url = base_url.rstrip("/")
        self.retries = retries
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._client = httpx.Client(base_url=self.base_url, timeout=timeout, transport=transport)

    def close(self):
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _predict(self, arch):
        body = {"genotype": serialize_genotype(arch)}
        error = None
        for _ in range(self.retries + 1):
            with self._slots:
                try:
                    resp = self._client.post("/predict", json=body)
                except httpx.TransportError as exc:
                    error = TransportFailure(f"{self.base_url}/predict: {exc}")
                    continue
            if resp.status_code >= 500:
                error = TransportFailure(f"{self.base_url}/predict returned {resp.status_code}")
                continue
            if not resp.is_success:
                raise TransportFailure(f"{self.base_url}/predict returned {resp.status_code}")
            try:
                payload = resp.json()
                return float(payload["accuracy"])
            except (ValueError, KeyError, TypeError):
                raise TransportFailure(f"malformed response from {self.base_url}/predict: {resp.text[:200]!r}") from None
        raise error


# ---------------------------------------------------------------- path encoding


class VocabularyMismatch(ValueError):
    pass


def enumerate_paths(cell: Cell, spec: SpaceSpec = DARTS) -> list:
    """All input-to-output paths as ``(input, ops)`` tuples, one per raw path.

    In DARTS mode every intermediate node reaches the output through its
    concat edge, so a path ends at each intermediate node it visits. Disabled
    edges are not traversed.
    """
    out_edges = {}
    for e in cell.edges:
        if e.op in ("none", ZERO):
            continue
        out_edges.setdefault(e.src, []).append(e)
    paths = []

    def walk(node, start, ops):
        if spec.kind == "darts":
            if ops:
                paths.append((start, ops))
        elif node == spec.output_node:
            paths.append((start, ops))
        for e in out_edges.get(node, ()):
            walk(e.dst, start, ops + (e.op,))

    for i in spec.input_nodes:
        walk(i, i, ())
    return paths


@dataclass(frozen=True)
class PathVocabulary:
    kind: str
    primitives: tuple
    paths: tuple

    @cached_property
    def index(self) -> dict:
        return {p: i for i, p in enumerate(self.paths)}


def build_path_vocabulary(spec: SpaceSpec = DARTS, truncation=2048, n_samples=100_000, seed=0, cells=None) -> PathVocabulary:
    """Rank paths by the number of corpus cells containing them.

    The corpus is ``cells`` if given, else ``n_samples`` uniform random cells
    drawn with ``seed``. Ties are broken by the path itself.
    """
    from .sampler import sample_cell

    spec = get_space(spec)
    if cells is None:
        rng = np.random.default_rng(seed)
        cells = (sample_cell(spec, rng) for _ in range(n_samples))
    freq = Counter()
    for cell in cells:
        freq.update(set(enumerate_paths(cell, spec)))
    ranked = sorted(freq, key=lambda p: (-freq[p], p))
    return PathVocabulary(spec.kind, tuple(spec.primitives), tuple(ranked[:truncation]))


def path_encode(cell: Cell, vocabulary: PathVocabulary, truncation=2048, spec: SpaceSpec = DARTS) -> np.ndarray:
    """Binary path-indicator vector of length ``truncation``."""
    spec = get_space(spec)
    if vocabulary.kind != spec.kind or tuple(vocabulary.primitives) != tuple(spec.primitives):
        raise VocabularyMismatch(f"vocabulary built for {vocabulary.kind} cannot encode {spec.kind} cells")
    vec = np.zeros(truncation, dtype=np.uint8)
    index = vocabulary.index
    for p in enumerate_paths(cell, spec):
        i = index.get(p)
        if i is not None and i < truncation:
            vec[i] = 1
    return vec


def encode_architecture(arch: Architecture, vocabulary: PathVocabulary, truncation=2048, spec: SpaceSpec = DARTS) -> np.ndarray:
    return np.concatenate([path_encode(cell, vocabulary, truncation, spec) for _, cell in arch.cells()])
