"""Cell search spaces: data model, genotype text formats, validation, counting.

Node indices follow the genotype convention. In the DARTS space nodes 0 and 1
are the cell inputs, 2..5 the intermediate nodes and 6 the implicit output
that concatenates every intermediate node. In the NB201 space node 0 is the
input, 1 and 2 are intermediate and 3 is the output; all six edges i < j exist.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple, Optional

from .dag import CONCAT, LabeledDag

DARTS_PRIMITIVES = (
    "sep_conv_3x3",
    "sep_conv_5x5",
    "dil_conv_3x3",
    "dil_conv_5x5",
    "max_pool_3x3",
    "avg_pool_3x3",
    "skip_connect",
)
NB201_PRIMITIVES = ("none", "skip_connect", "nor_conv_1x1", "nor_conv_3x3", "avg_pool_3x3")

# disabled operation; never part of a valid cell
ZERO = "zero"

SEP_CONVS = ("sep_conv_3x3", "sep_conv_5x5")
DIL_CONVS = ("dil_conv_3x3", "dil_conv_5x5")
POOLS = ("max_pool_3x3", "avg_pool_3x3")
SKIP = "skip_connect"


class CellSpaceError(ValueError):
    pass


class GenotypeSyntaxError(CellSpaceError):
    def __init__(self, message, position):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class GenotypeSemanticError(CellSpaceError):
    def __init__(self, constraint, message):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


@dataclass(frozen=True)
class SpaceSpec:
    """Search-space definition.

    ``in_degree`` is the number of in-edges per intermediate node (DARTS) and
    ``None`` for fully connected cells (NB201). ``distinct_sources`` forbids
    two in-edges of one node from sharing a source.
    """

    kind: str
    primitives: tuple
    n_inputs: int
    n_intermediate: int
    in_degree: Optional[int] = None
    distinct_sources: bool = True

    def __post_init__(self):
        if self.kind not in ("darts", "nb201"):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if not self.primitives:
            raise ValueError("primitive set must be nonempty")
        if ZERO in self.primitives:
            raise ValueError(f"{ZERO!r} is reserved for disabled operations")
        if self.kind == "darts" and not self.in_degree:
            raise ValueError("DARTS-style spaces need an in-degree")
        if self.kind == "nb201" and self.in_degree is not None:
            raise ValueError("NB201-style spaces are fully connected")

    @property
    def K(self) -> int:
        return len(self.primitives)

    @property
    def has_reduce(self) -> bool:
        return self.kind == "darts"

    @property
    def output_node(self) -> int:
        return self.n_inputs + self.n_intermediate

    @property
    def input_nodes(self) -> tuple:
        return tuple(range(self.n_inputs))

    @property
    def destinations(self) -> tuple:
        """Nodes that receive searchable edges."""
        if self.kind == "darts":
            return tuple(range(self.n_inputs, self.n_inputs + self.n_intermediate))
        return tuple(range(1, self.n_inputs + self.n_intermediate + 1))

    @property
    def edges_per_cell(self) -> int:
        if self.kind == "darts":
            return self.in_degree * self.n_intermediate
        return sum(d for d in self.destinations)

    def with_primitives(self, primitives) -> "SpaceSpec":
        return replace(self, primitives=tuple(primitives))


DARTS = SpaceSpec("darts", DARTS_PRIMITIVES, n_inputs=2, n_intermediate=4, in_degree=2)
NB201 = SpaceSpec("nb201", NB201_PRIMITIVES, n_inputs=1, n_intermediate=2)

SPACES = {"darts": DARTS, "nb201": NB201}


def get_space(name) -> SpaceSpec:
    if isinstance(name, SpaceSpec):
        return name
    try:
        return SPACES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown space {name!r}; expected one of {sorted(SPACES)}") from None


def node_label(spec: SpaceSpec, node: int) -> str:
    if node < spec.n_inputs:
        return f"in{node}"
    if node == spec.output_node:
        return "out"
    return "inter"


def node_name(spec: SpaceSpec, node: int) -> str:
    """Human readable node name: in0, in1, n0..n3, out."""
    if node < spec.n_inputs:
        return f"in{node}"
    if node == spec.output_node:
        return "out"
    return f"n{node - spec.n_inputs}"


class Edge(NamedTuple):
    src: int
    dst: int
    op: str


def _edge_key(e: Edge):
    return (e.dst, e.src, e.op)


@dataclass(frozen=True)
class Cell:
    """An edge list kept in canonical order: by destination, then source, then op.

    The ``slot`` of an edge is its position among the in-edges of its
    destination in that order.
    """

    edges: tuple = field(default=())

    def __post_init__(self):
        edges = tuple(Edge(*e) for e in self.edges)
        object.__setattr__(self, "edges", tuple(sorted(edges, key=_edge_key)))

    def in_edges(self, dst: int) -> tuple:
        return tuple(e for e in self.edges if e.dst == dst)

    def edge_at(self, dst: int, slot: int) -> Edge:
        ins = self.in_edges(dst)
        if not 0 <= slot < len(ins):
            raise IndexError(f"no edge at node {dst} slot {slot}")
        return ins[slot]

    def addresses(self):
        """Iterate ``(dst, slot, edge)`` in canonical order."""
        slot, prev = 0, None
        for e in self.edges:
            slot = slot + 1 if e.dst == prev else 0
            prev = e.dst
            yield e.dst, slot, e

    def replace_edge(self, old: Edge, new: Edge) -> "Cell":
        edges = list(self.edges)
        edges[edges.index(old)] = new
        return Cell(tuple(edges))

    def with_op(self, dst: int, slot: int, op: str) -> "Cell":
        e = self.edge_at(dst, slot)
        return self.replace_edge(e, e._replace(op=op))

    def map_ops(self, fn) -> "Cell":
        return Cell(tuple(e._replace(op=fn(e)) for e in self.edges))

    def ops(self) -> tuple:
        return tuple(e.op for e in self.edges)

    def wiring(self) -> tuple:
        return tuple((e.src, e.dst) for e in self.edges)


@dataclass(frozen=True)
class Architecture:
    normal: Cell
    reduce: Optional[Cell] = None

    def cell(self, kind: str) -> Cell:
        if kind == "normal":
            return self.normal
        if kind == "reduce":
            if self.reduce is None:
                raise CellSpaceError("architecture has no reduce cell")
            return self.reduce
        raise ValueError(f"unknown cell kind {kind!r}")

    def cells(self):
        yield "normal", self.normal
        if self.reduce is not None:
            yield "reduce", self.reduce

    def with_cell(self, kind: str, cell: Cell) -> "Architecture":
        if kind == "normal":
            return replace(self, normal=cell)
        if kind == "reduce":
            return replace(self, reduce=cell)
        raise ValueError(f"unknown cell kind {kind!r}")

    def count(self, ops, kind="normal") -> int:
        return sum(op in ops for op in self.cell(kind).ops())


# ---------------------------------------------------------------- validation


class Violation(NamedTuple):
    code: str
    message: str
    cell: Optional[str] = None


def validate(cell: Cell, spec: SpaceSpec, allow_zero=False) -> list:
    """Return the list of violated invariants; empty means valid."""
    out = []
    for e in cell.edges:
        if e.op == ZERO:
            if not allow_zero:
                out.append(Violation("reserved label", f"edge {e.src}->{e.dst} carries the reserved label {ZERO!r}"))
        elif e.op not in spec.primitives:
            out.append(Violation("unknown primitive", f"{e.op!r} is not in the {spec.kind} primitive set"))
        if e.dst not in spec.destinations:
            out.append(Violation("bad destination", f"node {e.dst} cannot receive edges"))
        elif not 0 <= e.src < e.dst:
            out.append(Violation("bad source index", f"source {e.src} does not precede node {e.dst}"))

    if len(cell.edges) != spec.edges_per_cell:
        out.append(Violation("wrong edge count", f"expected {spec.edges_per_cell} edges, got {len(cell.edges)}"))

    for dst in spec.destinations:
        ins = cell.in_edges(dst)
        srcs = [e.src for e in ins]
        if spec.kind == "darts":
            if len(ins) != spec.in_degree:
                out.append(Violation("in-degree", f"node {dst} has {len(ins)} in-edges, expected {spec.in_degree}"))
            if spec.distinct_sources and len(set(srcs)) != len(srcs):
                out.append(Violation("duplicate sources", f"node {dst} has two in-edges from the same node"))
        else:
            if sorted(srcs) != list(range(dst)):
                if len(set(srcs)) != len(srcs):
                    out.append(Violation("duplicate sources", f"node {dst} has repeated sources {srcs}"))
                else:
                    out.append(Violation("missing edge", f"node {dst} must receive exactly one edge from each of 0..{dst - 1}"))
    return out


def validate_architecture(arch: Architecture, spec: SpaceSpec, allow_zero=False) -> list:
    out = []
    if spec.has_reduce and arch.reduce is None:
        out.append(Violation("missing cell", "architecture has no reduce cell", "reduce"))
    if not spec.has_reduce and arch.reduce is not None:
        out.append(Violation("extra cell", f"{spec.kind} architectures have no reduce cell", "reduce"))
    for kind, cell in arch.cells():
        out.extend(v._replace(cell=kind) for v in validate(cell, spec, allow_zero))
    return out


def is_valid(arch: Architecture, spec: SpaceSpec) -> bool:
    return not validate_architecture(arch, spec)


def check_architecture(arch: Architecture, spec: SpaceSpec, allow_zero=False) -> Architecture:
    """Raise GenotypeSemanticError on the first violation."""
    problems = validate_architecture(arch, spec, allow_zero)
    if problems:
        v = problems[0]
        raise GenotypeSemanticError(v.code, f"{v.cell} cell: {v.message}" if v.cell else v.message)
    return arch


# ---------------------------------------------------------------- counting


class Cardinality(NamedTuple):
    cells: int
    architectures: int


def space_cardinality(spec: SpaceSpec) -> Cardinality:
    """Exact number of distinct cells, ignoring isomorphism."""
    K = spec.K
    if spec.kind == "nb201":
        n = K ** spec.edges_per_cell
        return Cardinality(n, n)
    d = spec.in_degree
    total = 1
    for dst in spec.destinations:
        preds = dst  # every earlier node is a legal source
        if spec.distinct_sources:
            total *= K**d * math.comb(preds, d)
        else:
            total *= math.comb(preds * K + d - 1, d)
    return Cardinality(total, total * total)


# ---------------------------------------------------------------- text formats


def _offset(text, lineno, col):
    lines = text.splitlines(keepends=True)
    return sum(len(l) for l in lines[: lineno - 1]) + col


def _fail(text, node, message):
    raise GenotypeSyntaxError(message, _offset(text, node.lineno, node.col_offset))


def _parse_pairs(text, node, allow_zero):
    if not isinstance(node, (ast.List, ast.Tuple)):
        _fail(text, node, "expected a list of (primitive, source) pairs")
    pairs = []
    for item in node.elts:
        if not (isinstance(item, ast.Tuple) and len(item.elts) == 2):
            _fail(text, item, "expected a pair ('<primitive>', <source index>)")
        op, src = item.elts
        if not (isinstance(op, ast.Constant) and isinstance(op.value, str)):
            _fail(text, op, "primitive name must be a string")
        if not (isinstance(src, ast.Constant) and type(src.value) is int):
            _fail(text, src, "source index must be an integer")
        pairs.append((op.value, src.value))
    return pairs


def _parse_concat(text, node):
    if isinstance(node, (ast.List, ast.Tuple)):
        vals = []
        for el in node.elts:
            if not (isinstance(el, ast.Constant) and type(el.value) is int):
                _fail(text, el, "concat entries must be integers")
            vals.append(el.value)
        return vals
    if (
        isinstance(node, ast.Call)
        and isinstance(node.func, ast.Name)
        and node.func.id == "range"
        and not node.keywords
        and all(isinstance(a, ast.Constant) and type(a.value) is int for a in node.args)
    ):
        return list(range(*[a.value for a in node.args]))
    _fail(text, node, "expected a concat list")


def pairs_to_cell(pairs, spec: SpaceSpec) -> Cell:
    """Convert a flattened DARTS pair list to a Cell (pair 2t, 2t+1 feed node t)."""
    expected = spec.edges_per_cell
    if len(pairs) != expected:
        raise GenotypeSemanticError("wrong edge count", f"expected {expected} pairs, got {len(pairs)}")
    d = spec.in_degree
    return Cell(tuple(Edge(src, spec.n_inputs + i // d, op) for i, (op, src) in enumerate(pairs)))


def parse_genotype(text: str, spec: SpaceSpec = DARTS, allow_zero=False) -> Architecture:
    """Parse a genotype string of the given space.

    DARTS text is the usual ``Genotype(normal=[...], normal_concat=[...],
    reduce=[...], reduce_concat=[...])`` expression; NB201 text is the
    ``|op~0|+|op~0|op~1|+|...|`` string.
    """
    spec = get_space(spec)
    if spec.kind == "nb201":
        return _parse_nb201(text, spec, allow_zero)
    src = text.strip()
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        pos = _offset(src, exc.lineno or 1, (exc.offset or 1) - 1)
        raise GenotypeSyntaxError(f"invalid genotype syntax: {exc.msg}", pos) from None
    call = tree.body
    if not (isinstance(call, ast.Call) and isinstance(call.func, ast.Name) and call.func.id == "Genotype"):
        _fail(src, call, "expected Genotype(...)")
    if call.args:
        _fail(src, call.args[0], "Genotype fields must be given by keyword")
    fields = {}
    for kw in call.keywords:
        if kw.arg not in ("normal", "normal_concat", "reduce", "reduce_concat"):
            _fail(src, kw.value, f"unexpected field {kw.arg!r}")
        if kw.arg in fields:
            _fail(src, kw.value, f"repeated field {kw.arg!r}")
        fields[kw.arg] = kw.value
    for name in ("normal", "normal_concat", "reduce", "reduce_concat"):
        if name not in fields:
            raise GenotypeSyntaxError(f"missing field {name!r}", len(src))

    concat = list(spec.destinations)
    cells = {}
    for kind in ("normal", "reduce"):
        pairs = _parse_pairs(src, fields[kind], allow_zero)
        if _parse_concat(src, fields[kind + "_concat"]) != concat:
            raise GenotypeSemanticError("bad concat", f"{kind}_concat must be {concat}")
        cells[kind] = pairs_to_cell(pairs, spec)
    arch = Architecture(cells["normal"], cells["reduce"])
    return check_architecture(arch, spec, allow_zero)


def _parse_nb201(text, spec, allow_zero):
    s = text.strip()
    groups = s.split("+")
    edges = []
    pos = 0
    for dst, group in enumerate(groups, start=1):
        if len(group) < 2 or group[0] != "|" or group[-1] != "|":
            raise GenotypeSyntaxError("each node group must be delimited by '|'", pos)
        inner = group[1:-1]
        off = pos + 1
        for token in inner.split("|"):
            if token.count("~") != 1:
                raise GenotypeSyntaxError(f"expected '<op>~<source>', got {token!r}", off)
            op, src = token.split("~")
            if not src.isdigit():
                raise GenotypeSyntaxError(f"source index {src!r} is not an integer", off + len(op) + 1)
            edges.append(Edge(int(src), dst, op))
            off += len(token) + 1
        pos += len(group) + 1
    arch = Architecture(Cell(tuple(edges)))
    return check_architecture(arch, spec, allow_zero)


def cell_pairs(cell: Cell) -> list:
    return [(e.op, e.src) for e in cell.edges]


def serialize_genotype(arch: Architecture) -> str:
    """Canonical text for an architecture (inverse of :func:`parse_genotype`)."""
    if arch.reduce is None:
        return serialize_nb201(arch.normal)

    def fmt(cell):
        return "[" + ", ".join(f"({op!r}, {src})" for op, src in cell_pairs(cell)) + "]"

    concat = sorted({e.dst for e in arch.normal.edges})
    c = "[" + ", ".join(map(str, concat)) + "]"
    return f"Genotype(normal={fmt(arch.normal)}, normal_concat={c}, reduce={fmt(arch.reduce)}, reduce_concat={c})"


def serialize_nb201(cell: Cell) -> str:
    groups = []
    for dst in sorted({e.dst for e in cell.edges}):
        groups.append("|" + "|".join(f"{e.op}~{e.src}" for e in cell.in_edges(dst)) + "|")
    return "+".join(groups)


def canonical_form(cell: Cell) -> str:
    """Code that identifies a cell up to reordering of each node's in-edges.

    Intermediate-node relabelings are deliberately not identified.
    """
    parts = []
    for dst in sorted({e.dst for e in cell.edges}):
        parts.append(f"{dst}<" + ",".join(f"{e.src}:{e.op}" for e in cell.in_edges(dst)))
    return ";".join(parts)


def canonical_genotype(text: str, spec: SpaceSpec = DARTS) -> str:
    return serialize_genotype(parse_genotype(text, spec))


# ---------------------------------------------------------------- DAG view


def to_dag(cell: Cell, spec: SpaceSpec = DARTS, edges: Optional[Iterable[Edge]] = None, include_output=None) -> LabeledDag:
    """Labeled DAG of a cell, or of an edge subset of it.

    With ``edges=None`` the whole cell is converted and, in DARTS mode, every
    intermediate node gets a ``concat`` edge to the output node. For a subset
    only the endpoints of the given edges appear and no concat edges are
    added unless ``include_output`` is set. Disabled edges (``none`` and
    ``zero``) are dropped.
    """
    full = edges is None
    chosen = [e for e in (cell.edges if full else edges) if e.op not in ("none", ZERO)]
    if include_output is None:
        include_output = full
    dag_edges = [(e.src, e.dst, e.op) for e in chosen]
    used = {e.src for e in chosen} | {e.dst for e in chosen}
    if full:
        used |= set(range(spec.output_node + 1))
    if include_output and spec.kind == "darts":
        inters = sorted(spec.destinations) if full else sorted(n for n in used if n in spec.destinations)
        dag_edges += [(n, spec.output_node, CONCAT) for n in inters]
        if inters:
            used.add(spec.output_node)
    nodes = tuple((n, node_label(spec, n)) for n in sorted(used))
    return LabeledDag(nodes, tuple(dag_edges))
