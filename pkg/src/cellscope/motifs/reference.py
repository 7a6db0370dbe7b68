"""Important-operation subgraphs, random null references and support ratios."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from ..cellspace import DARTS, Architecture, SpaceSpec, get_space, to_dag
from ..dag import LabeledDag, edge_subgraph
from .gspan import Pattern, contains


class MissingRecords(ValueError):
    pass


def important_subgraph(arch: Architecture, records, threshold: Optional[float] = None, cell="normal", spec: SpaceSpec = DARTS) -> LabeledDag:
    """DAG of the operations whose |OI| reaches ``threshold``.

    With ``threshold=None`` the records' own ``important`` flags are used.
    Only endpoints of kept edges appear; the result may be disconnected.
    """
    spec = get_space(spec)
    c = arch.cell(cell)
    by_address = {(r.dst, r.slot): r for r in records if r.cell == cell}
    kept = []
    for dst, slot, edge in c.addresses():
        r = by_address.get((dst, slot))
        if r is None:
            raise MissingRecords(f"no OI record for {cell} cell node {dst} slot {slot}")
        if r.primitive != edge.op:
            raise MissingRecords(f"record for node {dst} slot {slot} is for {r.primitive}, cell has {edge.op}")
        if (r.important if threshold is None else abs(r.oi) >= threshold):
            kept.append(edge)
    return to_dag(c, spec, edges=kept)


def null_reference(dag: LabeledDag, m: int, rng, repetitions=1) -> list:
    """``repetitions`` random subgraphs of exactly ``m`` op edges each, drawn
    uniformly without replacement from the op edges of ``dag``.
    """
    pool = dag.op_edges()
    if not 0 <= m <= len(pool):
        raise ValueError(f"cannot sample {m} edges from {len(pool)}")
    out = []
    for _ in range(repetitions):
        idx = sorted(rng.choice(len(pool), size=m, replace=False).tolist()) if m else []
        out.append(edge_subgraph(dag, [pool[i] for i in idx]))
    return out


@dataclass(frozen=True)
class SupportStats:
    pattern: Pattern
    count_target: int
    count_ref: int
    support_target: float
    support_ref: float
    ratio: float

    def to_json(self) -> dict:
        return {
            "code": self.pattern.code_string(),
            "nodes": self.pattern.n_nodes,
            "edges": self.pattern.n_edges,
            "count_target": self.count_target,
            "count_ref": self.count_ref,
            "support_target": self.support_target,
            "support_ref": self.support_ref,
            "ratio": self.ratio,
            "rendering": self.pattern.render(),
        }


def support_ratio(support_target: float, support_ref: float) -> float:
    return support_target / support_ref


def reference_counts(patterns: Sequence[Pattern], reference: Sequence[LabeledDag]) -> dict:
    return {p: sum(contains(p, g) for g in reference) for p in patterns}


def ratio_rank(target: Sequence, reference: Mapping, n_target: int, n_reference: Optional[int] = None, floor=1) -> list:
    """Rank target patterns by support in the target over support in the reference.

    ``target`` holds ``(pattern, count)`` pairs and ``reference`` maps each
    pattern to its reference count. Supports are count / n_target and
    count / n_reference (default n_target). A zero reference count is raised
    to ``floor`` occurrences in the ratio's denominator; the reported
    ``support_ref`` stays unfloored. Order: ratio descending, then target
    support descending, then canonical code.
    """
    n_reference = n_target if n_reference is None else n_reference
    stats = []
    for pattern, count in target:
        c_ref = reference.get(pattern, 0)
        s_t = count / n_target
        s_r = c_ref / n_reference
        ratio = s_t / (max(c_ref, floor) / n_reference)
        stats.append(SupportStats(pattern, count, c_ref, s_t, s_r, ratio))
    stats.sort(key=lambda s: (-s.ratio, -s.support_target, s.pattern.code))
    return stats
