"""Analytic parameter and MAC counts for networks stacked from cells, plus
accuracy/cost Pareto fronts.

Default formulas follow the public DARTS evaluation networks: batch norm is
affine (2C parameters, no MACs), convolutions have no bias, pooling and
identity skips are free, and a stride-2 skip is a factorized reduction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, NamedTuple, Optional, Sequence

from .cellspace import DARTS, Architecture

MULTIPLIER = 4  # intermediate nodes concatenated into the cell output


def ceil_half(h: int) -> int:
    return -(-h // 2)


# ------------------------------------------------------------ config & layout


@dataclass(frozen=True)
class NetworkConfig:
    layers: int = 20
    init_channels: int = 36
    num_classes: int = 10
    input_resolution: tuple = (32, 32)
    stem_multiplier: int = 3
    include_auxiliary: bool = False
    stem: str = "cifar"

    def __post_init__(self):
        if self.layers < 3:
            raise ValueError("layers must be at least 3 so both reduction cells exist")
        if self.stem not in ("cifar", "imagenet"):
            raise ValueError(f"unknown stem {self.stem!r}")
        res = self.input_resolution
        if isinstance(res, int):
            object.__setattr__(self, "input_resolution", (res, res))
        if self.init_channels < 2 or self.init_channels % 2:
            raise ValueError("init_channels must be a positive even number")


PRESETS = {
    "cifar-eval": NetworkConfig(20, 36, 10, (32, 32), 3),
    "cifar-proxy": NetworkConfig(8, 32, 10, (32, 32), 3),
    "imagenet": NetworkConfig(14, 48, 1000, (224, 224), stem="imagenet"),
}


def get_preset(name: str, **overrides) -> NetworkConfig:
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None
    return replace(cfg, **overrides) if overrides else cfg


class CellLayout(NamedTuple):
    index: int
    kind: str  # "normal" or "reduce"
    c_prev_prev: int
    c_prev: int
    channels: int
    reduction: bool
    reduction_prev: bool
    size_prev_prev: tuple
    size_prev: tuple
    size_out: tuple


def _halve(size):
    return tuple(ceil_half(s) for s in size)


def stem_output(cfg: NetworkConfig):
    """(c_prev_prev, c_prev, size_prev_prev, size_prev, reduction_prev)."""
    C = cfg.init_channels
    size = tuple(cfg.input_resolution)
    if cfg.stem == "cifar":
        c = cfg.stem_multiplier * C
        return c, c, size, size, False
    s0 = _halve(_halve(size))
    return C, C, s0, _halve(s0), True


def reduction_indices(layers: int) -> tuple:
    return (layers // 3, 2 * layers // 3)


def assemble_layout(cfg: NetworkConfig) -> list:
    """One CellLayout per cell. Reduce cells sit at L//3 and 2L//3 and double
    the channel width; the cell output has MULTIPLIER·width channels."""
    c_pp, c_p, s_pp, s_p, red_prev = stem_output(cfg)
    C = cfg.init_channels
    out = []
    reds = reduction_indices(cfg.layers)
    for i in range(cfg.layers):
        red = i in reds
        if red:
            C *= 2
        s_out = _halve(s_p) if red else s_p
        out.append(CellLayout(i, "reduce" if red else "normal", c_pp, c_p, C, red, red_prev, s_pp, s_p, s_out))
        c_pp, c_p = c_p, MULTIPLIER * C
        s_pp, s_p = s_p, s_out
        red_prev = red
    return out


# ------------------------------------------------------------------ cost table


def _sep_params(k):
    return lambda C, stride: 2 * (C * k * k + C * C + 2 * C)


def _sep_macs(k):
    return lambda C, stride, positions: 2 * (C * k * k + C * C) * positions


def _dil_params(k):
    return lambda C, stride: C * k * k + C * C + 2 * C


def _dil_macs(k):
    return lambda C, stride, positions: (C * k * k + C * C) * positions


def _free(C, stride, positions=None):
    return 0


def _skip_params(C, stride):
    return 0 if stride == 1 else C * C + 2 * C


def _skip_macs(C, stride, positions):
    return 0 if stride == 1 else C * C * positions


@dataclass(frozen=True)
class CostTable:
    """Per-primitive closed forms.

    ``params[op](C, stride)`` gives parameters; ``macs[op](C, stride, P)``
    gives multiply-accumulates for P output positions.
    """

    params: Mapping[str, Callable] = field(default_factory=dict)
    macs: Mapping[str, Callable] = field(default_factory=dict)

    def op_params(self, op: str, C: int, stride: int = 1) -> int:
        try:
            return self.params[op](C, stride)
        except KeyError:
            raise KeyError(f"no parameter formula for primitive {op!r}") from None

    def op_macs(self, op: str, C: int, stride: int, positions: int) -> int:
        try:
            return self.macs[op](C, stride, positions)
        except KeyError:
            raise KeyError(f"no MAC formula for primitive {op!r}") from None

    def override(self, op: str, params: Optional[Callable] = None, macs: Optional[Callable] = None) -> "CostTable":
        p, m = dict(self.params), dict(self.macs)
        if params is not None:
            p[op] = params
        if macs is not None:
            m[op] = macs
        return CostTable(p, m)


DEFAULT_TABLE = CostTable(
    params={
        "sep_conv_3x3": _sep_params(3),
        "sep_conv_5x5": _sep_params(5),
        "dil_conv_3x3": _dil_params(3),
        "dil_conv_5x5": _dil_params(5),
        "max_pool_3x3": _free,
        "avg_pool_3x3": _free,
        "skip_connect": _skip_params,
    },
    macs={
        "sep_conv_3x3": _sep_macs(3),
        "sep_conv_5x5": _sep_macs(5),
        "dil_conv_3x3": _dil_macs(3),
        "dil_conv_5x5": _dil_macs(5),
        "max_pool_3x3": _free,
        "avg_pool_3x3": _free,
        "skip_connect": _skip_macs,
    },
)


# --------------------------------------------------------------- accounting


@dataclass
class CostBreakdown:
    stem: int = 0
    preprocessing: int = 0
    ops: int = 0
    classifier: int = 0
    auxiliary: int = 0

    @property
    def total(self) -> int:
        return self.stem + self.preprocessing + self.ops + self.classifier + self.auxiliary

    def to_json(self) -> dict:
        return {
            "stem": self.stem,
            "preprocessing": self.preprocessing,
            "ops": self.ops,
            "classifier": self.classifier,
            "auxiliary": self.auxiliary,
            "total": self.total,
        }


def _area(size):
    return size[0] * size[1]


def _conv_out(size, k, stride, pad):
    return tuple((s + 2 * pad - k) // stride + 1 for s in size)


def _aux_channels(layout):
    i = 2 * len(layout) // 3
    return MULTIPLIER * layout[i].channels, layout[i].size_out


def _tally(arch: Architecture, cfg: NetworkConfig, table: CostTable):
    """Parameter and MAC breakdowns in one pass."""
    p, m = CostBreakdown(), CostBreakdown()
    C = cfg.init_channels
    size = tuple(cfg.input_resolution)
    if cfg.stem == "cifar":
        c = cfg.stem_multiplier * C
        p.stem = 3 * c * 9 + 2 * c
        m.stem = 3 * c * 9 * _area(size)
    else:
        half = C // 2
        s1 = _halve(size)
        s2 = _halve(s1)
        s3 = _halve(s2)
        p.stem = 3 * half * 9 + 2 * half + half * C * 9 + 2 * C + C * C * 9 + 2 * C
        m.stem = 3 * half * 9 * _area(s1) + half * C * 9 * _area(s2) + C * C * 9 * _area(s3)

    layout = assemble_layout(cfg)
    for cl in layout:
        C = cl.channels
        # s0: factorized reduction after a reduce cell, 1x1 conv otherwise
        p.preprocessing += cl.c_prev_prev * C + 2 * C
        s0 = cl.size_prev if cl.reduction_prev else cl.size_prev_prev
        m.preprocessing += cl.c_prev_prev * C * _area(s0)
        p.preprocessing += cl.c_prev * C + 2 * C
        m.preprocessing += cl.c_prev * C * _area(cl.size_prev)
        positions = _area(cl.size_out)
        for e in arch.cell(cl.kind).edges:
            stride = 2 if cl.reduction and e.src in DARTS.input_nodes else 1
            p.ops += table.op_params(e.op, C, stride)
            m.ops += table.op_macs(e.op, C, stride, positions)

    c_final = MULTIPLIER * layout[-1].channels
    p.classifier = c_final * cfg.num_classes + cfg.num_classes
    m.classifier = c_final * cfg.num_classes

    if cfg.include_auxiliary:
        c_aux, s_aux = _aux_channels(layout)
        pool_stride = 3 if cfg.stem == "cifar" else 2
        s_pool = _conv_out(s_aux, 5, pool_stride, 0)
        s_conv = _conv_out(s_pool, 2, 1, 0)
        p.auxiliary = c_aux * 128 + 2 * 128 + 128 * 768 * 4 + 768 * cfg.num_classes + cfg.num_classes
        if cfg.stem == "cifar":
            p.auxiliary += 2 * 768  # the ImageNet head has no norm after its 2x2 conv
        m.auxiliary = c_aux * 128 * _area(s_pool) + 128 * 768 * 4 * _area(s_conv) + 768 * cfg.num_classes
    return p, m


def count_params(arch: Architecture, cfg: NetworkConfig = PRESETS["cifar-eval"], table: CostTable = DEFAULT_TABLE, breakdown=False):
    p, _ = _tally(arch, cfg, table)
    return p if breakdown else p.total


def count_flops(arch: Architecture, cfg: NetworkConfig = PRESETS["cifar-eval"], table: CostTable = DEFAULT_TABLE, breakdown=False):
    """Multiply-accumulates of one forward pass (norm and pooling excluded)."""
    _, m = _tally(arch, cfg, table)
    return m if breakdown else m.total


def cost_estimate(arch: Architecture, cfg: NetworkConfig, table: CostTable = DEFAULT_TABLE) -> dict:
    p, m = _tally(arch, cfg, table)
    return {"params": p.total, "macs": m.total}


# ----------------------------------------------------------------- pareto


class ParetoPoint(NamedTuple):
    arch_id: str
    accuracy: float
    params: float
    flops: float


def _check_point(pt):
    for name in ("accuracy", "params", "flops"):
        v = getattr(pt, name)
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"point {pt.arch_id!r}: {name} must be finite and nonnegative, got {v}")


def pareto_front(points: Sequence[ParetoPoint], cost: str = "params") -> list:
    """Points not dominated in (maximize accuracy, minimize ``cost``).

    Exact duplicates do not dominate each other. Output is sorted by cost,
    ties kept in input order.
    """
    if cost not in ("params", "flops"):
        raise ValueError("cost must be 'params' or 'flops'")
    if not points:
        raise ValueError("no points")
    for pt in points:
        _check_point(pt)
    order = sorted(points, key=lambda q: getattr(q, cost))
    front = []
    best = -math.inf
    i = 0
    while i < len(order):
        c = getattr(order[i], cost)
        j = i
        while j < len(order) and getattr(order[j], cost) == c:
            j += 1
        group = order[i:j]
        top = max(q.accuracy for q in group)
        if top > best:
            front.extend(q for q in group if q.accuracy == top)
            best = top
        i = j
    return front
