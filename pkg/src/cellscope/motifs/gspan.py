"""Frequent connected subgraph mining (gSpan) on labeled DAGs.

Direction is folded into the edge label: walking an edge ``u -> v`` from
``u`` gives label ``(op, 0)`` and walking it from ``v`` gives ``(op, 1)``.
With that, the undirected gSpan machinery (DFS codes, rightmost extension,
minimality check) applies unchanged. A DFS code entry is
``(i, j, label_i, (op, dir), label_j)``.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

from ..dag import CONCAT, LabeledDag

OUT, IN = 0, 1


class _Graph:
    __slots__ = ("labels", "adj")

    def __init__(self, labels, edges):
        self.labels = labels
        self.adj = [[] for _ in labels]
        for eid, (u, v, lab) in enumerate(edges):
            self.adj[u].append((v, (lab, OUT), eid))
            self.adj[v].append((u, (lab, IN), eid))

    @classmethod
    def from_dag(cls, dag: LabeledDag, include_concat=False):
        index = {n: i for i, (n, _) in enumerate(dag.nodes)}
        labels = [lab for _, lab in dag.nodes]
        edges = [(index[s], index[d], lab) for s, d, lab in dag.edges if include_concat or lab != CONCAT]
        return cls(labels, edges)


@dataclass(frozen=True)
class Pattern:
    """A connected pattern identified by its minimum DFS code."""

    code: tuple

    @property
    def n_edges(self) -> int:
        return len(self.code)

    @property
    def n_nodes(self) -> int:
        return 1 + max(max(i, j) for i, j, *_ in self.code) if self.code else 0

    @property
    def node_labels(self) -> list:
        labels = {}
        for i, j, li, _, lj in self.code:
            labels.setdefault(i, li)
            labels.setdefault(j, lj)
        return [labels[k] for k in range(len(labels))]

    def edges(self) -> list:
        """Directed ``(src, dst, op)`` edges over pattern vertex indices."""
        out = []
        for i, j, _, (lab, d), _ in self.code:
            out.append((i, j, lab) if d == OUT else (j, i, lab))
        return out

    def to_dag(self) -> LabeledDag:
        return LabeledDag(tuple(enumerate(self.node_labels)), tuple(self.edges()))

    def code_string(self) -> str:
        parts = []
        for i, j, li, (lab, d), lj in self.code:
            arrow = ">" if d == OUT else "<"
            parts.append(f"({i},{j},{li},{lab},{arrow},{lj})")
        return "".join(parts)

    def render(self) -> list:
        names = [f"{lab}#{k}" for k, lab in enumerate(self.node_labels)]
        return [f"{names[s]} -{lab}-> {names[d]}" for s, d, lab in self.edges()]

    def __str__(self):
        return "; ".join(self.render())


def _ext_key(entry):
    i, j, _, el, lj = entry
    if i > j:  # backward
        return (0, j, el)
    return (1, -i, el, lj)


def _rightmost_path(code):
    """Vertices on the rightmost path, rightmost vertex first."""
    path = []
    old = None
    for i, j, *_ in reversed(code):
        if i < j and (old is None or j == old):
            path.append(j)
            old = i
    path.append(0)
    return path


def _extensions(graph, code, vmap, used):
    """Yield (entry, new_vmap, new_used) for every rightmost extension."""
    rmpath = _rightmost_path(code)
    r = rmpath[0]
    n = len(vmap)
    labels = graph.labels
    gr = vmap[r]
    targets = {vmap[k]: k for k in rmpath[1:]}
    for nb, el, eid in graph.adj[gr]:
        if eid not in used and nb in targets:
            yield (r, targets[nb], labels[gr], el, labels[nb]), vmap, used | {eid}
    mapped = set(vmap)
    for k in rmpath:
        gk = vmap[k]
        for nb, el, eid in graph.adj[gk]:
            if nb not in mapped:
                yield (k, n, labels[gk], el, labels[nb]), vmap + (nb,), used | {eid}


def _code_graph(code):
    pattern = Pattern(tuple(code))
    return _Graph(pattern.node_labels, pattern.edges())


def is_min(code) -> bool:
    """True iff ``code`` is the minimum DFS code of the graph it describes."""
    g = _code_graph(code)
    first = code[0]
    best = None
    projs = []
    for u in range(len(g.labels)):
        for v, el, eid in g.adj[u]:
            key = (g.labels[u], el, g.labels[v])
            if best is None or key < best:
                best, projs = key, []
            if key == best:
                projs.append(((u, v), frozenset((eid,))))
    if best < first[2:]:
        return False
    for step in range(1, len(code)):
        cands = defaultdict(list)
        for vmap, used in projs:
            for entry, nv, nu in _extensions(g, code[:step], vmap, used):
                cands[entry].append((nv, nu))
        entry = min(cands, key=_ext_key)
        if _ext_key(entry) < _ext_key(code[step]):
            return False
        projs = cands[entry]
    return True


def mine_frequent(corpus: Sequence[LabeledDag], min_support=0.05, max_edges=5, include_concat=False) -> list:
    """All connected patterns with 1..max_edges edges whose support (fraction
    of corpus graphs containing them) is at least ``min_support``.

    Returns ``(Pattern, count)`` pairs sorted by canonical code; ``count``
    counts graphs, not embeddings.
    """
    if not corpus:
        raise ValueError("empty corpus")
    if not 0 < min_support <= 1:
        raise ValueError("min_support must lie in (0, 1]")
    graphs = [_Graph.from_dag(d, include_concat) for d in corpus]
    T = len(graphs)
    results = []

    def frequent(projs):
        count = len({gid for gid, _, _ in projs})
        return count, count / T >= min_support

    def grow(code, projs):
        count, ok = frequent(projs)
        if not ok or not is_min(code):
            return
        results.append((Pattern(tuple(code)), count))
        if len(code) >= max_edges:
            return
        ext = defaultdict(list)
        for gid, vmap, used in projs:
            for entry, nv, nu in _extensions(graphs[gid], code, vmap, used):
                ext[entry].append((gid, nv, nu))
        for entry in sorted(ext, key=_ext_key):
            grow(code + [entry], ext[entry])

    init = defaultdict(list)
    for gid, g in enumerate(graphs):
        for u in range(len(g.labels)):
            for v, el, eid in g.adj[u]:
                init[(0, 1, g.labels[u], el, g.labels[v])].append((gid, (u, v), frozenset((eid,))))
    for entry in sorted(init, key=lambda e: e[2:]):
        grow([entry], init[entry])
    results.sort(key=lambda pc: pc[0].code)
    return results


def canonical_pattern(dag: LabeledDag, include_concat=False) -> Pattern:
    """Minimum DFS code of a connected DAG."""
    g = _Graph.from_dag(dag, include_concat)
    n_edges = sum(len(a) for a in g.adj) // 2
    if n_edges == 0:
        raise ValueError("pattern needs at least one edge")
    best = None
    projs = []
    for u in range(len(g.labels)):
        for v, el, eid in g.adj[u]:
            key = (g.labels[u], el, g.labels[v])
            if best is None or key < best:
                best, projs = key, []
            if key == best:
                projs.append(((u, v), frozenset((eid,))))
    code = [(0, 1) + best]
    while len(code) < n_edges:
        cands = defaultdict(list)
        for vmap, used in projs:
            for entry, nv, nu in _extensions(g, code, vmap, used):
                cands[entry].append((nv, nu))
        if not cands:
            raise ValueError("pattern graph is not connected")
        entry = min(cands, key=_ext_key)
        code.append(entry)
        projs = cands[entry]
    return Pattern(tuple(code))


# ---------------------------------------------------------------- containment


def contains(pattern, dag: LabeledDag) -> bool:
    """Label- and direction-preserving edge-subgraph embedding test.

    ``pattern`` is a Pattern or a LabeledDag; nodes map injectively onto
    nodes with equal labels and every pattern edge must map onto a dag edge
    with the same label and direction.
    """
    if isinstance(pattern, Pattern):
        p_labels = pattern.node_labels
        p_edges = pattern.edges()
    else:
        index = {n: i for i, (n, _) in enumerate(pattern.nodes)}
        p_labels = [lab for _, lab in pattern.nodes]
        p_edges = [(index[s], index[d], lab) for s, d, lab in pattern.edges]
    g_labels = dict(dag.nodes)
    g_edge = {(s, d): lab for s, d, lab in dag.edges}
    g_out, g_in = defaultdict(list), defaultdict(list)
    for s, d, _ in dag.edges:
        g_out[s].append(d)
        g_in[d].append(s)

    n = len(p_labels)
    # visit pattern vertices so each one after the first touches an earlier one
    nbrs = defaultdict(list)
    for s, d, lab in p_edges:
        nbrs[s].append((d, lab, OUT))
        nbrs[d].append((s, lab, IN))
    order, seen = [], set()
    for start in range(n):
        if start in seen:
            continue
        stack = [start]
        seen.add(start)
        while stack:
            x = stack.pop()
            order.append(x)
            for y, _, _ in sorted(nbrs[x]):
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
    pos = {v: k for k, v in enumerate(order)}

    mapping = {}
    used = set()

    def consistent(v, gv):
        for w, lab, d in nbrs[v]:
            if w in mapping:
                key = (gv, mapping[w]) if d == OUT else (mapping[w], gv)
                if g_edge.get(key) != lab:
                    return False
        return True

    def candidates(v):
        for w, _, d in nbrs[v]:
            if w in mapping and pos[w] < pos[v]:
                return g_out[mapping[w]] if d == IN else g_in[mapping[w]]
        return list(g_labels)

    def backtrack(k):
        if k == n:
            return True
        v = order[k]
        for gv in candidates(v):
            if gv in used or g_labels[gv] != p_labels[v] or not consistent(v, gv):
                continue
            mapping[v] = gv
            used.add(gv)
            if backtrack(k + 1):
                return True
            del mapping[v]
            used.discard(gv)
        return False

    return backtrack(0)


def support_count(pattern, corpus: Sequence[LabeledDag]) -> int:
    return sum(contains(pattern, g) for g in corpus)
