"""Constructive random sampling of architectures under the Skip/Prim constraints."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .cellspace import (
    DARTS,
    POOLS,
    SEP_CONVS,
    SKIP,
    Architecture,
    Cell,
    Edge,
    SpaceSpec,
    get_space,
    is_valid,
)
from .motifs.residual import has_residual_link

NB201_CONVS = ("nor_conv_1x1", "nor_conv_3x3")


@dataclass(frozen=True)
class ConstraintSet:
    """``skip``: wire the residual pair; ``prim``: restrict the primitive pool.

    Under ``prim`` each free slot becomes parameterless with probability
    ``p`` (skip, or uniformly skip/pooling when ``pool_allowed``) and is a
    convolution from the restricted pool otherwise.
    """

    skip: bool = False
    prim: bool = False
    pool_allowed: bool = False
    p: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if (self.p or self.pool_allowed) and not self.prim:
            raise ValueError("p and pool_allowed only apply with the prim constraint")


GROUPS = {
    "random": ConstraintSet(),
    "skip": ConstraintSet(skip=True),
    "prim": ConstraintSet(prim=True),
    "primskip": ConstraintSet(skip=True, prim=True),
}


def get_group(name) -> ConstraintSet:
    try:
        return GROUPS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown group {name!r}; expected one of {sorted(GROUPS)}") from None


def prim_pool(spec: SpaceSpec) -> tuple:
    return SEP_CONVS if spec.kind == "darts" else NB201_CONVS


def parameterless(spec: SpaceSpec, constraints: ConstraintSet) -> tuple:
    if constraints.pool_allowed:
        return (SKIP,) + tuple(op for op in POOLS if op in spec.primitives)
    return (SKIP,)


def allowed_ops(spec: SpaceSpec, constraints: ConstraintSet) -> tuple:
    """Primitives a free slot can take."""
    if not constraints.prim:
        return tuple(spec.primitives)
    if constraints.p == 1.0:
        return parameterless(spec, constraints)
    if constraints.p == 0.0:
        return prim_pool(spec)
    return prim_pool(spec) + parameterless(spec, constraints)


def residual_edges(spec: SpaceSpec) -> tuple:
    """Edges fixed by the Skip constraint."""
    if spec.kind == "darts":
        first = spec.destinations[0]
        return tuple(Edge(i, first, SKIP) for i in spec.input_nodes)
    return (Edge(0, spec.output_node, SKIP),)


def _draw_op(spec, constraints, rng):
    if not constraints.prim:
        ops = spec.primitives
    elif rng.random() < constraints.p:
        ops = parameterless(spec, constraints)
    else:
        ops = prim_pool(spec)
    return ops[rng.integers(len(ops))]


def sample_cell(spec: SpaceSpec = DARTS, rng=None, constraints: ConstraintSet = ConstraintSet()) -> Cell:
    spec = get_space(spec)
    rng = np.random.default_rng() if rng is None else rng
    fixed = {(e.src, e.dst): e for e in residual_edges(spec)} if constraints.skip else {}
    edges = []
    if spec.kind == "darts":
        for dst in spec.destinations:
            if dst == spec.destinations[0] and constraints.skip:
                edges.extend(residual_edges(spec))
                continue
            pairs = list(itertools.combinations(range(dst), spec.in_degree))
            srcs = pairs[rng.integers(len(pairs))]
            edges.extend(Edge(s, dst, _draw_op(spec, constraints, rng)) for s in srcs)
    else:
        for dst in spec.destinations:
            for src in range(dst):
                if (src, dst) in fixed:
                    edges.append(fixed[(src, dst)])
                else:
                    edges.append(Edge(src, dst, _draw_op(spec, constraints, rng)))
    return Cell(tuple(edges))


def sample(spec: SpaceSpec = DARTS, constraints: ConstraintSet = ConstraintSet(), rng=None) -> Architecture:
    """One architecture; normal and reduce cells follow the same rule."""
    spec = get_space(spec)
    rng = np.random.default_rng() if rng is None else rng
    normal = sample_cell(spec, rng, constraints)
    reduce = sample_cell(spec, rng, constraints) if spec.has_reduce else None
    return Architecture(normal, reduce)


def group_sample(group, n: int, spec: SpaceSpec = DARTS, rng=None) -> list:
    if n < 1:
        raise ValueError("n must be at least 1")
    constraints = get_group(group) if isinstance(group, str) else group
    rng = np.random.default_rng() if rng is None else rng
    return [sample(spec, constraints, rng) for _ in range(n)]


def spawn_rngs(seed: int, n_batches: int) -> list:
    """Independent generators for parallel batches, batch i using stream i."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_batches)]


def attest(arch: Architecture, spec: SpaceSpec = DARTS, constraints: ConstraintSet = GROUPS["primskip"]) -> dict:
    """Check an architecture against a constraint set, per cell."""
    spec = get_space(spec)
    fixed = set(residual_edges(spec))
    pool = set(allowed_ops(spec, constraints))
    report = {"valid": is_valid(arch, spec)}
    residual_pair = residual_present = prims_ok = True
    for _, cell in arch.cells():
        residual_pair &= fixed <= set(cell.edges)
        residual_present &= has_residual_link(cell, spec).present
        free = [e for e in cell.edges if not (constraints.skip and e in fixed)]
        prims_ok &= all(e.op in pool for e in free)
    if constraints.skip:
        report["residual_pair"] = residual_pair
        report["residual"] = residual_present
    if constraints.prim:
        report["primitive_pool"] = prims_ok
    return report


def subspace_cardinality(spec: SpaceSpec = DARTS, constraints: ConstraintSet = ConstraintSet()) -> int:
    """Number of distinct cells the sampler can emit under ``constraints``."""
    spec = get_space(spec)
    m = len(allowed_ops(spec, constraints))
    if spec.kind == "nb201":
        free = spec.edges_per_cell - (1 if constraints.skip else 0)
        return m**free
    total = 1
    for dst in spec.destinations:
        if dst == spec.destinations[0] and constraints.skip:
            continue
        total *= math.comb(dst, spec.in_degree) * m**spec.in_degree
    return total
