"""Operation importance: mean accuracy change over all single-edge perturbations."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .cellspace import (
    DARTS,
    SKIP,
    ZERO,
    Architecture,
    CellSpaceError,
    SpaceSpec,
    get_space,
    serialize_genotype,
)
from .surrogate import Evaluator
from .wilcoxon import WilcoxonResult, wilcoxon_signed_rank

DEFAULT_THRESHOLD = 0.001
CELL_ORDER = {"normal": 0, "reduce": 1}


class EdgeAddress(NamedTuple):
    cell: str
    dst: int
    slot: int


class InvalidEdgeAddress(CellSpaceError, IndexError):
    pass


class IncompleteRecords(ValueError):
    pass


@dataclass(frozen=True)
class OIRecord:
    arch_id: object
    cell: str
    dst: int
    slot: int
    primitive: str
    oi: float
    neighbors: int
    important: bool

    @property
    def address(self) -> EdgeAddress:
        return EdgeAddress(self.cell, self.dst, self.slot)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "OIRecord":
        fields = set(cls.__dataclass_fields__)
        extra = set(data) - fields
        if extra:
            raise ValueError(f"unknown OI record fields: {sorted(extra)}")
        missing = fields - set(data)
        if missing:
            raise ValueError(f"missing OI record fields: {sorted(missing)}")
        return cls(**data)


def edge_addresses(arch: Architecture) -> list:
    return [EdgeAddress(kind, dst, slot) for kind, cell in arch.cells() for dst, slot, _ in cell.addresses()]


def _locate(arch, address):
    try:
        cell = arch.cell(address.cell)
        return cell, cell.edge_at(address.dst, address.slot)
    except (IndexError, CellSpaceError, ValueError) as exc:
        raise InvalidEdgeAddress(f"invalid edge address {tuple(address)}: {exc}") from None


def neighbors(arch: Architecture, address: EdgeAddress, spec: SpaceSpec = DARTS) -> list:
    """Architectures differing from ``arch`` only on the addressed edge.

    These are the K-1 substitutions of the edge's primitive, followed by every
    legal rewiring of its source (an earlier node other than the current
    source and the sibling edge's source). Destinations are never rewired:
    that would break the in-degree constraint at two nodes at once.
    """
    spec = get_space(spec)
    address = EdgeAddress(*address)
    cell, edge = _locate(arch, address)
    out = []
    for op in spec.primitives:
        if op != edge.op:
            out.append(arch.with_cell(address.cell, cell.replace_edge(edge, edge._replace(op=op))))
    if spec.kind == "darts":
        used = {e.src for e in cell.in_edges(edge.dst)}
        for src in range(edge.dst):
            if src not in used:
                out.append(arch.with_cell(address.cell, cell.replace_edge(edge, edge._replace(src=src))))
    return out


def operation_importance(
    arch: Architecture,
    address: EdgeAddress,
    ev: Evaluator,
    spec: SpaceSpec = DARTS,
    threshold=DEFAULT_THRESHOLD,
    arch_id=None,
    base_accuracy: Optional[float] = None,
) -> OIRecord:
    """OI = mean over neighbours of y(neighbour) - y(arch).

    Any evaluator failure propagates; no record is built from a partial
    neighbour set.
    """
    address = EdgeAddress(*address)
    _, edge = _locate(arch, address)
    base = ev.evaluate(arch) if base_accuracy is None else base_accuracy
    nbrs = neighbors(arch, address, spec)
    deltas = [ev.evaluate(n) - base for n in nbrs]
    oi = math.fsum(deltas) / len(deltas)
    return OIRecord(arch_id, address.cell, address.dst, address.slot, edge.op, oi, len(nbrs), abs(oi) >= threshold)


def architecture_importance(arch: Architecture, ev: Evaluator, spec: SpaceSpec = DARTS, threshold=DEFAULT_THRESHOLD, arch_id=None, cells=None) -> list:
    """OI records for every edge of the selected cells (default: all)."""
    base = ev.evaluate(arch)
    return [
        operation_importance(arch, a, ev, spec, threshold, arch_id, base)
        for a in edge_addresses(arch)
        if cells is None or a.cell in cells
    ]


def corpus_importance(archs: Sequence[Architecture], ev: Evaluator, spec: SpaceSpec = DARTS, threshold=DEFAULT_THRESHOLD, arch_ids=None, workers=1, cells=None) -> list:
    """Records for a corpus, concatenated in corpus order regardless of ``workers``."""
    arch_ids = list(range(len(archs))) if arch_ids is None else list(arch_ids)

    def one(i):
        return architecture_importance(archs[i], ev, spec, threshold, arch_ids[i], cells)

    if workers <= 1:
        chunks = [one(i) for i in range(len(archs))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(one, range(len(archs))))
    return [r for chunk in chunks for r in chunk]


def reflag(records, threshold) -> list:
    """Re-apply an importance threshold."""
    return [OIRecord(**{**asdict(r), "important": abs(r.oi) >= threshold}) for r in records]


# ---------------------------------------------------------------- aggregation


@dataclass(frozen=True)
class OISummary:
    primitive: str
    cell: str
    count: int
    mean: Optional[float]
    q1: Optional[float]
    median: Optional[float]
    q3: Optional[float]
    fraction_important: Optional[float]


def aggregate_oi(records: Sequence[OIRecord], spec: SpaceSpec = DARTS) -> list:
    """Per (primitive, cell kind) distribution summary; empty groups have count 0."""
    spec = get_space(spec)
    if not records:
        raise ValueError("no records to aggregate")
    groups = {}
    for r in records:
        groups.setdefault((r.primitive, r.cell), []).append(r)
    kinds = ["normal", "reduce"] if spec.has_reduce else ["normal"]
    out = []
    for cell in kinds:
        for prim in spec.primitives:
            rs = groups.get((prim, cell), [])
            if not rs:
                out.append(OISummary(prim, cell, 0, None, None, None, None, None))
                continue
            vals = np.array([r.oi for r in rs])
            q1, med, q3 = np.percentile(vals, [25, 50, 75])
            out.append(
                OISummary(
                    prim,
                    cell,
                    len(rs),
                    math.fsum(vals) / len(vals),
                    float(q1),
                    float(med),
                    float(q3),
                    sum(r.important for r in rs) / len(rs),
                )
            )
    return out


def important_fractions(records: Sequence[OIRecord]) -> dict:
    """Share of the important operations held by each primitive."""
    imp = [r for r in records if r.important]
    counts = {}
    for r in imp:
        counts[r.primitive] = counts.get(r.primitive, 0) + 1
    return {p: c / len(imp) for p, c in sorted(counts.items())}


# ---------------------------------------------------------------- disabling


@dataclass(frozen=True)
class DisableSchedule:
    order: str
    addresses: tuple
    steps: tuple


def _address_key(a: EdgeAddress):
    return (CELL_ORDER[a.cell], a.dst, a.slot)


def disable_schedule(arch: Architecture, records: Sequence[OIRecord], order="descending") -> DisableSchedule:
    """Genotypes with the 1, 2, ... highest (descending) or lowest (ascending)
    OI operations zeroed, stopping once half of the operations are disabled.
    Ties go to the smaller edge address.
    """
    if order not in ("ascending", "descending"):
        raise ValueError("order must be 'ascending' or 'descending'")
    addresses = edge_addresses(arch)
    by_address = {r.address: r for r in records}
    missing = [a for a in addresses if a not in by_address]
    if missing:
        raise IncompleteRecords(f"no OI record for {len(missing)} operations, e.g. {tuple(missing[0])}")
    sign = -1.0 if order == "descending" else 1.0
    ranked = sorted(addresses, key=lambda a: (sign * by_address[a].oi, _address_key(a)))
    ranked = ranked[: len(addresses) // 2]
    steps = []
    cur = arch
    for a in ranked:
        cur = cur.with_cell(a.cell, cur.cell(a.cell).with_op(a.dst, a.slot, ZERO))
        steps.append(serialize_genotype(cur))
    return DisableSchedule(order, tuple(ranked), tuple(steps))


# ---------------------------------------------------------------- derived cells


def derive_variants(arch: Architecture) -> dict:
    """The four reduce/normal swap and all-skip variants of a DARTS architecture."""
    if arch.reduce is None:
        raise CellSpaceError("derived variants need a reduce cell")

    def skips(cell):
        return cell.map_ops(lambda e: SKIP)

    return {
        "red<-nor": Architecture(arch.normal, arch.normal),
        "red<-skip": Architecture(arch.normal, skips(arch.reduce)),
        "nor<-red": Architecture(arch.reduce, arch.reduce),
        "nor<-skip": Architecture(skips(arch.normal), arch.reduce),
    }


__all__ = [
    "DEFAULT_THRESHOLD",
    "DisableSchedule",
    "EdgeAddress",
    "IncompleteRecords",
    "InvalidEdgeAddress",
    "OIRecord",
    "OISummary",
    "WilcoxonResult",
    "aggregate_oi",
    "architecture_importance",
    "corpus_importance",
    "derive_variants",
    "disable_schedule",
    "edge_addresses",
    "important_fractions",
    "neighbors",
    "operation_importance",
    "reflag",
    "wilcoxon_signed_rank",
]
