"""Minimal primitive edits that bring a DARTS architecture into PrimSkip compliance."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .cellspace import (
    DARTS,
    DIL_CONVS,
    POOLS,
    SEP_CONVS,
    SKIP,
    Architecture,
    Cell,
    CellSpaceError,
)

COMPLIANT = SEP_CONVS + (SKIP,)

# kernel-size matched replacements
KERNEL_TARGETS = {
    "dil_conv_3x3": "sep_conv_3x3",
    "dil_conv_5x5": "sep_conv_5x5",
    "max_pool_3x3": "sep_conv_3x3",
    "avg_pool_3x3": "sep_conv_3x3",
}

# lower loses less when turned into the residual skip
_LOSS_RANK = {**{op: 0 for op in POOLS}, **{op: 1 for op in DIL_CONVS}, **{op: 2 for op in SEP_CONVS}}


class WiringMismatch(CellSpaceError):
    pass


class Edit(NamedTuple):
    dst: int
    slot: int
    old: str
    new: str
    reason: str


@dataclass(frozen=True)
class EditReport:
    edited: Architecture
    edits: tuple
    distance: int

    def to_json(self) -> dict:
        return {
            "distance": self.distance,
            "edits": [e._asdict() for e in self.edits],
        }


def edit_to_compliance(arch: Architecture, rng=None, replacement="kernel") -> EditReport:
    """Edit the normal cell's primitives, never its wiring, then copy it into
    the reduce cell.

    1. If no skip leaves a cell input, the input edge cheapest to lose
       (pooling, then dilated, then separable convs; ties by address)
       becomes a skip.
    2. Primitives outside {sep_conv_3x3, sep_conv_5x5, skip_connect} are
       replaced: by kernel size (``replacement="kernel"``) or uniformly
       among the two separable convs (``"random"``).
    3. Skips between intermediate nodes become a uniformly random separable
       conv.

    ``distance`` counts changed normal-cell slots; the reduce substitution
    is free. ``rng`` defaults to a generator seeded with 0.
    """
    if arch.reduce is None:
        raise CellSpaceError("compliance editing needs a DARTS architecture")
    if replacement not in ("kernel", "random"):
        raise ValueError("replacement must be 'kernel' or 'random'")
    rng = np.random.default_rng(0) if rng is None else rng
    inputs = DARTS.input_nodes
    slots = list(arch.normal.addresses())
    ops = {(d, s): e.op for d, s, e in slots}
    reasons = {}

    if not any(e.op == SKIP and e.src in inputs for _, _, e in slots):
        cands = [(d, s, e) for d, s, e in slots if e.src in inputs]
        d, s, _ = min(cands, key=lambda t: (_LOSS_RANK.get(t[2].op, 3), t[0], t[1]))
        ops[(d, s)] = SKIP
        reasons[(d, s)] = "residual link created"

    for d, s, e in slots:
        if (d, s) in reasons:
            continue
        if e.op not in COMPLIANT:
            if replacement == "kernel":
                new = KERNEL_TARGETS.get(e.op, "sep_conv_3x3")
            else:
                new = SEP_CONVS[rng.integers(2)]
            ops[(d, s)] = new
            reasons[(d, s)] = "primitive outside pool"
        elif e.op == SKIP and e.src not in inputs:
            ops[(d, s)] = SEP_CONVS[rng.integers(2)]
            reasons[(d, s)] = "non-residual skip"

    edges = []
    edits = []
    for d, s, e in slots:
        new = ops[(d, s)]
        edges.append(e._replace(op=new))
        if new != e.op:
            edits.append(Edit(d, s, e.op, new, reasons[(d, s)]))
    normal = Cell(tuple(edges))
    return EditReport(Architecture(normal, normal), tuple(edits), len(edits))


def edit_distance(a: Architecture, b: Architecture) -> int:
    """Number of normal-cell slots with different primitives (same wiring required)."""
    if a.normal.wiring() != b.normal.wiring():
        raise WiringMismatch("architectures differ in wiring")
    return sum(x != y for x, y in zip(a.normal.ops(), b.normal.ops()))
