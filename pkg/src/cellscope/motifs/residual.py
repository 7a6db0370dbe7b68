from __future__ import annotations

from typing import NamedTuple

from ..cellspace import DARTS, DIL_CONVS, SEP_CONVS, SKIP, Cell, SpaceSpec

CONVS = SEP_CONVS + DIL_CONVS + ("nor_conv_1x1", "nor_conv_3x3")


class ResidualInfo(NamedTuple):
    present: bool
    via_in0: bool
    via_in1: bool
    other_skips: int


def has_residual_link(cell: Cell, spec: SpaceSpec = DARTS, strict=False) -> ResidualInfo:
    """Detect ResNet-style residual links: skip edges leaving a cell input.

    With ``strict`` an input skip only counts when the other in-edge of its
    destination is a convolution. In NB201 mode the only residual position is
    the input-to-output edge.
    """
    inputs = spec.input_nodes
    via = [False] * len(inputs)
    other = 0
    for e in cell.edges:
        if e.op != SKIP:
            continue
        is_residual = e.src in inputs
        if is_residual and spec.kind == "nb201":
            is_residual = e.dst == spec.output_node
        if is_residual and strict:
            is_residual = any(s.op in CONVS for s in cell.in_edges(e.dst) if s != e)
        if is_residual:
            via[e.src] = True
        elif e.src not in inputs:
            other += 1
    via_in1 = via[1] if len(via) > 1 else False
    return ResidualInfo(any(via), via[0], via_in1, other)
