"""Labeled DAG used for subgraph mining and path enumeration."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

CONCAT = "concat"
NODE_LABELS = ("in0", "in1", "inter", "out")


@dataclass(frozen=True)
class LabeledDag:
    """Node- and edge-labeled directed acyclic graph.

    ``nodes`` is a tuple of ``(id, label)`` and ``edges`` a tuple of
    ``(src, dst, label)``. Node ids are arbitrary hashables (cell node
    indices in practice); edges must connect declared nodes.
    """

    nodes: tuple = ()
    edges: tuple = ()

    def __post_init__(self):
        ids = [n for n, _ in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node id")
        known = set(ids)
        seen = set()
        for s, d, _ in self.edges:
            if s not in known or d not in known:
                raise ValueError(f"edge ({s}, {d}) references an unknown node")
            if s == d:
                raise ValueError("self loop")
            pair = frozenset((s, d))
            if pair in seen:
                raise ValueError(f"parallel edge between {s} and {d}")
            seen.add(pair)
        if not _acyclic(ids, self.edges):
            raise ValueError("graph contains a cycle")

    @property
    def node_labels(self) -> dict:
        return dict(self.nodes)

    def op_edges(self) -> tuple:
        return tuple(e for e in self.edges if e[2] != CONCAT)

    def without_concat(self) -> "LabeledDag":
        """Drop concat edges and any node they leave isolated."""
        return edge_subgraph(self, self.op_edges())

    def successors(self, node) -> Iterator[tuple]:
        for s, d, lab in self.edges:
            if s == node:
                yield d, lab

    def __len__(self):
        return len(self.edges)


def edge_subgraph(dag: LabeledDag, edges) -> LabeledDag:
    """Subgraph induced by an edge subset: the edges plus their endpoints."""
    edges = tuple(edges)
    used = {s for s, _, _ in edges} | {d for _, d, _ in edges}
    nodes = tuple((n, lab) for n, lab in dag.nodes if n in used)
    return LabeledDag(nodes, edges)


def _acyclic(ids, edges) -> bool:
    indeg = {n: 0 for n in ids}
    out = {n: [] for n in ids}
    for s, d, _ in edges:
        indeg[d] += 1
        out[s].append(d)
    stack = [n for n, k in indeg.items() if k == 0]
    visited = 0
    while stack:
        n = stack.pop()
        visited += 1
        for d in out[n]:
            indeg[d] -= 1
            if indeg[d] == 0:
                stack.append(d)
    return visited == len(ids)
