import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellscope.cellspace import DARTS, DARTS_PRIMITIVES, DIL_CONVS, NB201, POOLS, SEP_CONVS, SKIP, Cell, Edge, is_valid, serialize_genotype, validate
from cellscope.motifs import has_residual_link
from cellscope.sampler import (
    GROUPS,
    ConstraintSet,
    attest,
    group_sample,
    sample,
    sample_cell,
    spawn_rngs,
    subspace_cardinality,
)


def enumerate_primskip_cells():
    """Every DARTS cell with the residual pair at node 2 and s3/s5 elsewhere."""
    out = set()
    wirings = [list(itertools.combinations(range(d), 2)) for d in (3, 4, 5)]
    for w in itertools.product(*wirings):
        for ops in itertools.product(SEP_CONVS, repeat=6):
            edges = [Edge(0, 2, SKIP), Edge(1, 2, SKIP)]
            k = 0
            for pair, dst in zip(w, (3, 4, 5)):
                for s in pair:
                    edges.append(Edge(s, dst, ops[k]))
                    k += 1
            cell = Cell(tuple(edges))
            assert not validate(cell, DARTS)
            out.add(cell)
    return out


def test_primskip_subspace_exhaustive():
    assert len(enumerate_primskip_cells()) == 11_520 == subspace_cardinality(DARTS, GROUPS["primskip"])


def test_sampler_reaches_only_enumerated_cells():
    space = enumerate_primskip_cells()
    rng = np.random.default_rng(3)
    for a in group_sample("primskip", 300, DARTS, rng):
        assert a.normal in space and a.reduce in space


def test_subspace_cardinalities():
    assert subspace_cardinality(DARTS) == 1_037_664_180
    assert subspace_cardinality(NB201, GROUPS["primskip"]) == 2**5
    assert subspace_cardinality(NB201, GROUPS["skip"]) == 5**5


@pytest.mark.parametrize("group", sorted(GROUPS))
@pytest.mark.parametrize("space", ["darts", "nb201"])
def test_groups_valid_and_attested(group, space):
    archs = group_sample(group, 200, space, np.random.default_rng(11))
    for a in archs:
        report = attest(a, space, GROUPS[group])
        assert all(report.values()), report


def test_skip_group_passes_detector():
    for a in group_sample("skip", 100, DARTS, np.random.default_rng(0)):
        assert has_residual_link(a.normal).present
        assert a.normal.in_edges(2) == (Edge(0, 2, SKIP), Edge(1, 2, SKIP))
        assert a.reduce.in_edges(2) == (Edge(0, 2, SKIP), Edge(1, 2, SKIP))


def test_prim_group_excludes_other_primitives():
    banned = set(DIL_CONVS + POOLS)
    for a in group_sample("prim", 100, DARTS, np.random.default_rng(0)):
        for _, cell in a.cells():
            assert not banned & set(cell.ops())


def test_primskip_p0_all_separable():
    for a in group_sample("primskip", 1000, DARTS, np.random.default_rng(5)):
        free = [e for e in a.normal.edges if e.dst != 2]
        assert len(free) == 6 and all(e.op in SEP_CONVS for e in free)


def test_primskip_p1_all_skip():
    c = ConstraintSet(skip=True, prim=True, p=1.0)
    for a in group_sample(c, 100, DARTS, np.random.default_rng(5)):
        assert set(a.normal.ops()) == {SKIP} and set(a.reduce.ops()) == {SKIP}


def test_pool_allowed_draws_pools():
    c = ConstraintSet(skip=True, prim=True, pool_allowed=True, p=1.0)
    seen = Counter()
    for a in group_sample(c, 300, DARTS, np.random.default_rng(1)):
        seen.update(e.op for e in a.normal.edges if e.dst != 2)
        assert attest(a, DARTS, c)["primitive_pool"]
    assert set(seen) == {SKIP, *POOLS}


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1))
def test_p_controls_parameterless_rate(p):
    c = ConstraintSet(prim=True, p=p)
    rng = np.random.default_rng(0)
    archs = group_sample(c, 200, DARTS, rng)
    frac = np.mean([op == SKIP for a in archs for op in a.normal.ops()])
    assert abs(frac - p) < 0.06


def test_constraint_set_validation():
    with pytest.raises(ValueError):
        ConstraintSet(p=0.5)
    with pytest.raises(ValueError):
        ConstraintSet(prim=True, p=1.5)
    with pytest.raises(ValueError):
        ConstraintSet(pool_allowed=True)


def test_uniform_marginals():
    rng = np.random.default_rng(2024)
    n = 20_000
    ops = Counter()
    pairs = Counter()
    for _ in range(n):
        cell = sample_cell(DARTS, rng)
        for slot, e in enumerate(cell.edges):
            ops[(slot, e.op)] += 1
        pairs[tuple(e.src for e in cell.in_edges(5))] += 1
    for slot in range(8):
        for op in DARTS_PRIMITIVES:
            assert abs(ops[(slot, op)] / n - 1 / 7) < 0.01
    assert len(pairs) == 10
    for c in pairs.values():
        assert abs(c / n - 1 / 10) < 0.01


def test_seed_determinism():
    a = [serialize_genotype(x) for x in group_sample("primskip", 20, DARTS, np.random.default_rng(7))]
    b = [serialize_genotype(x) for x in group_sample("primskip", 20, DARTS, np.random.default_rng(7))]
    assert a == b


def test_spawned_streams_are_order_independent():
    r1 = spawn_rngs(9, 3)
    r2 = spawn_rngs(9, 3)
    later = [serialize_genotype(sample(DARTS, rng=r)) for r in reversed(r2)][::-1]
    first = [serialize_genotype(sample(DARTS, rng=r)) for r in r1]
    assert first == later
    assert len(set(first)) == 3


def test_group_sample_needs_positive_n():
    with pytest.raises(ValueError):
        group_sample("random", 0)


def test_nb201_skip_places_residual():
    for a in group_sample("primskip", 50, NB201, np.random.default_rng(0)):
        assert Edge(0, 3, SKIP) in a.normal.edges
        assert is_valid(a, NB201)
        others = [e.op for e in a.normal.edges if (e.src, e.dst) != (0, 3)]
        assert set(others) <= {"nor_conv_1x1", "nor_conv_3x3"}
