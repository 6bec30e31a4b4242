"""
Task Graph Model
This module provides the task DAG used by every mapper: dense integer node ids,
per-edge data sizes and per-task performance attributes, plus validation,
virtual endpoint normalization and topological orders.
"""
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from services.platform import TaskAttributes

logger = logging.getLogger(__name__)

NODE_FIELDS = {"id", "name", "complexity", "parallelizability", "streamability", "area"}
EDGE_FIELDS = {"src", "dst", "bytes"}

# Attributes of virtual source/sink tasks: free on every unit
VIRTUAL_ATTRIBUTES = TaskAttributes(complexity=0.0, parallelizability=1.0, streamability=1.0, area=0.0)


class TaskGraphError(ValueError):
    """Invalid task graph data"""


class CycleError(TaskGraphError):
    """Raised when an order is requested for a graph that contains a cycle"""

    def __init__(self, message: str, nodes: Sequence[int] = ()):
        super().__init__(message)
        self.nodes = tuple(nodes)


class GraphFormatError(TaskGraphError):
    """Graph JSON does not match the accepted schema"""


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    data_size: float


@dataclass(frozen=True)
class GraphViolation:
    """One broken TaskGraph invariant, naming the offending nodes"""
    kind: str
    detail: str
    nodes: Tuple[int, ...] = ()


@dataclass(frozen=True)
class TaskGraph:
    """
    Immutable task DAG.

    Nodes are the dense integers 0..n-1. Construction only checks that edge
    endpoints are in range; acyclicity and simplicity are reported by validate().
    """
    num_nodes: int
    edges: Tuple[Edge, ...] = ()
    attributes: Tuple[TaskAttributes, ...] = ()
    names: Tuple[Optional[str], ...] = ()
    virtual: FrozenSet[int] = frozenset()
    _succ: Tuple[Tuple[int, ...], ...] = field(default=(), repr=False, compare=False)
    _pred: Tuple[Tuple[int, ...], ...] = field(default=(), repr=False, compare=False)
    _bytes: Dict[Tuple[int, int], float] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = self.num_nodes
        if n < 0:
            raise TaskGraphError(f"Node count must be non-negative, got {n}")
        if not self.attributes:
            object.__setattr__(self, "attributes", tuple(TaskAttributes() for _ in range(n)))
        if not self.names:
            object.__setattr__(self, "names", tuple(None for _ in range(n)))
        if len(self.attributes) != n or len(self.names) != n:
            raise TaskGraphError(f"Expected {n} attribute and name entries")
        object.__setattr__(self, "edges", tuple(self.edges))

        succ: List[List[int]] = [[] for _ in range(n)]
        pred: List[List[int]] = [[] for _ in range(n)]
        sizes: Dict[Tuple[int, int], float] = {}
        for e in self.edges:
            if not (0 <= e.src < n and 0 <= e.dst < n):
                raise TaskGraphError(f"Edge {e.src}->{e.dst} references a node outside 0..{n - 1}")
            succ[e.src].append(e.dst)
            pred[e.dst].append(e.src)
            sizes[(e.src, e.dst)] = max(sizes.get((e.src, e.dst), 0.0), e.data_size)
        object.__setattr__(self, "_succ", tuple(tuple(sorted(s)) for s in succ))
        object.__setattr__(self, "_pred", tuple(tuple(sorted(p)) for p in pred))
        object.__setattr__(self, "_bytes", sizes)

    @classmethod
    def from_edges(cls, num_nodes: int, edges: Iterable[Tuple[int, int, float]],
                   attributes: Optional[Sequence[TaskAttributes]] = None,
                   names: Optional[Sequence[Optional[str]]] = None) -> "TaskGraph":
        """
        Build a simple graph, merging duplicate (src, dst) pairs by keeping the larger size.

        Args:
            num_nodes: Number of tasks
            edges: (src, dst, data_size) triples
            attributes: Optional per-task attributes
            names: Optional per-task labels

        Returns:
            A TaskGraph without duplicate edges
        """
        merged: Dict[Tuple[int, int], float] = {}
        duplicates = 0
        for src, dst, size in edges:
            key = (int(src), int(dst))
            if key in merged:
                duplicates += 1
                merged[key] = max(merged[key], float(size))
            else:
                merged[key] = float(size)
        if duplicates:
            logger.debug(f"Merged {duplicates} duplicate edges")
        return cls(
            num_nodes=num_nodes,
            edges=tuple(Edge(s, d, b) for (s, d), b in merged.items()),
            attributes=tuple(attributes) if attributes is not None else (),
            names=tuple(names) if names is not None else (),
        )

    @property
    def nodes(self) -> range:
        return range(self.num_nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def successors(self, v: int) -> Tuple[int, ...]:
        return self._succ[v]

    def predecessors(self, v: int) -> Tuple[int, ...]:
        return self._pred[v]

    def in_degree(self, v: int) -> int:
        return len(self._pred[v])

    def out_degree(self, v: int) -> int:
        return len(self._succ[v])

    def edge_bytes(self, u: int, v: int) -> float:
        return self._bytes[(u, v)]

    def input_bytes(self, v: int, source_bytes: float) -> float:
        """Bytes consumed by task v; source tasks read `source_bytes` of virtual input"""
        preds = self._pred[v]
        if not preds:
            return source_bytes
        return sum(self._bytes[(q, v)] for q in preds)

    def sources(self) -> List[int]:
        return [v for v in self.nodes if not self._pred[v]]

    def sinks(self) -> List[int]:
        return [v for v in self.nodes if not self._succ[v]]

    def real_nodes(self) -> List[int]:
        return [v for v in self.nodes if v not in self.virtual]

    def with_attributes(self, attributes: Sequence[TaskAttributes]) -> "TaskGraph":
        return replace(self, attributes=tuple(attributes))

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.nodes)
        for e in self.edges:
            graph.add_edge(e.src, e.dst, bytes=e.data_size)
        return graph


def validate(g: TaskGraph) -> List[GraphViolation]:
    """Return every broken invariant of g; an empty list means the graph is valid"""
    violations: List[GraphViolation] = []
    seen = set()
    for e in g.edges:
        key = (e.src, e.dst)
        if e.src == e.dst:
            violations.append(GraphViolation("self-loop", f"self-loop on node {e.src}", (e.src,)))
        if key in seen:
            violations.append(GraphViolation("duplicate-edge", f"duplicate edge {e.src}->{e.dst}", key))
        seen.add(key)
        if not e.data_size > 0:
            violations.append(GraphViolation(
                "edge-size", f"edge {e.src}->{e.dst} has non-positive size {e.data_size}", key))

    for v, attrs in enumerate(g.attributes):
        for problem in attrs.violations():
            violations.append(GraphViolation("attribute", f"node {v}: {problem}", (v,)))

    graph = nx.DiGraph()
    graph.add_nodes_from(g.nodes)
    graph.add_edges_from((e.src, e.dst) for e in g.edges if e.src != e.dst)
    if not nx.is_directed_acyclic_graph(graph):
        cycle = nx.find_cycle(graph)
        nodes = tuple(u for u, _ in cycle)
        path = " -> ".join(str(u) for u in nodes + (nodes[0],))
        violations.append(GraphViolation("cycle", f"cycle {path}", nodes))
    return violations


def normalize_endpoints(g: TaskGraph, default_edge_size: float) -> Tuple[TaskGraph, int, int]:
    """
    Ensure a single source and a single sink.

    Graphs that already have exactly one source and one (different) sink are returned
    unchanged. Otherwise a virtual source wired to every former source and a virtual
    sink wired from every former sink are appended as nodes n and n+1.

    Returns:
        (graph, start, end)
    """
    if g.num_nodes == 0:
        raise TaskGraphError("Cannot normalize an empty graph")
    sources, sinks = g.sources(), g.sinks()
    if len(sources) == 1 and len(sinks) == 1 and sources[0] != sinks[0]:
        return g, sources[0], sinks[0]

    n = g.num_nodes
    start, end = n, n + 1
    edges = list(g.edges)
    edges.extend(Edge(start, s, default_edge_size) for s in sources)
    edges.extend(Edge(t, end, default_edge_size) for t in sinks)
    normalized = TaskGraph(
        num_nodes=n + 2,
        edges=tuple(edges),
        attributes=g.attributes + (VIRTUAL_ATTRIBUTES, VIRTUAL_ATTRIBUTES),
        names=g.names + ("<virtual-source>", "<virtual-sink>"),
        virtual=g.virtual | {start, end},
    )
    logger.debug(f"Inserted virtual endpoints for {len(sources)} sources and {len(sinks)} sinks")
    return normalized, start, end


def _raise_cycle(g: TaskGraph, emitted: int):
    cycle = [u for u, _ in nx.find_cycle(g.to_networkx())]
    path = " -> ".join(str(u) for u in cycle + cycle[:1])
    raise CycleError(f"Graph contains the cycle {path} ({g.num_nodes - emitted} nodes unordered)", cycle)


def bfs_order(g: TaskGraph) -> List[int]:
    """Level-wise breadth-first topological order from all sources, ties by ascending id"""
    remaining = [g.in_degree(v) for v in g.nodes]
    level = [v for v in g.nodes if remaining[v] == 0]
    order: List[int] = []
    while level:
        order.extend(level)
        ready = []
        for v in level:
            for w in g.successors(v):
                remaining[w] -= 1
                if remaining[w] == 0:
                    ready.append(w)
        level = sorted(ready)
    if len(order) != g.num_nodes:
        _raise_cycle(g, len(order))
    return order


def random_topological_order(g: TaskGraph, seed: int) -> List[int]:
    """Kahn's algorithm choosing uniformly from the ready set with a seeded generator"""
    rng = np.random.default_rng(seed)
    remaining = [g.in_degree(v) for v in g.nodes]
    ready = [v for v in g.nodes if remaining[v] == 0]
    order: List[int] = []
    while ready:
        i = int(rng.integers(len(ready)))
        ready[i], ready[-1] = ready[-1], ready[i]
        v = ready.pop()
        order.append(v)
        for w in g.successors(v):
            remaining[w] -= 1
            if remaining[w] == 0:
                ready.append(w)
    if len(order) != g.num_nodes:
        _raise_cycle(g, len(order))
    return order


def is_topological(g: TaskGraph, order: Sequence[int]) -> bool:
    if sorted(order) != list(g.nodes):
        return False
    position = {v: i for i, v in enumerate(order)}
    return all(position[e.src] < position[e.dst] for e in g.edges)


def graph_from_dict(doc: Dict[str, Any]) -> TaskGraph:
    """
    Parse the native graph JSON document.

    Node ids must be exactly 0..n-1 (in any order). Unknown fields are rejected.
    """
    if not isinstance(doc, dict) or set(doc) - {"nodes", "edges"} or "nodes" not in doc:
        raise GraphFormatError("Graph document must be an object with 'nodes' and optional 'edges'")
    raw_nodes = doc["nodes"]
    raw_edges = doc.get("edges", [])
    by_id: Dict[int, Dict[str, Any]] = {}
    for node in raw_nodes:
        if not isinstance(node, dict):
            raise GraphFormatError(f"Node entry must be an object: {node!r}")
        unknown = set(node) - NODE_FIELDS
        if unknown:
            raise GraphFormatError(f"Unknown node fields {sorted(unknown)}")
        if "id" not in node:
            raise GraphFormatError(f"Node entry without 'id': {node!r}")
        node_id = node["id"]
        if not isinstance(node_id, int) or isinstance(node_id, bool):
            raise GraphFormatError(f"Node id must be an integer, got {node_id!r}")
        if node_id in by_id:
            raise GraphFormatError(f"Duplicate node id {node_id}")
        by_id[node_id] = node
    n = len(by_id)
    if set(by_id) != set(range(n)):
        raise GraphFormatError(f"Node ids must be dense 0..{n - 1}")

    attributes, names = [], []
    for v in range(n):
        node = by_id[v]
        try:
            attributes.append(TaskAttributes(
                complexity=float(node.get("complexity", 0.0)),
                parallelizability=float(node.get("parallelizability", 0.0)),
                streamability=float(node.get("streamability", 1.0)),
                area=float(node.get("area", 0.0)),
            ))
        except (TypeError, ValueError) as e:
            raise GraphFormatError(f"Node {v}: {e}") from e
        names.append(node.get("name"))

    edges = []
    for edge in raw_edges:
        if not isinstance(edge, dict):
            raise GraphFormatError(f"Edge entry must be an object: {edge!r}")
        unknown = set(edge) - EDGE_FIELDS
        if unknown:
            raise GraphFormatError(f"Unknown edge fields {sorted(unknown)}")
        missing = EDGE_FIELDS - set(edge)
        if missing:
            raise GraphFormatError(f"Edge entry missing {sorted(missing)}: {edge!r}")
        edges.append(Edge(int(edge["src"]), int(edge["dst"]), float(edge["bytes"])))
    return TaskGraph(num_nodes=n, edges=tuple(edges), attributes=tuple(attributes), names=tuple(names))


def graph_to_dict(g: TaskGraph) -> Dict[str, Any]:
    nodes = []
    for v in g.nodes:
        entry: Dict[str, Any] = {"id": v}
        if g.names[v] is not None:
            entry["name"] = g.names[v]
        entry.update(g.attributes[v].to_dict())
        nodes.append(entry)
    edges = [{"src": e.src, "dst": e.dst, "bytes": e.data_size}
             for e in sorted(g.edges, key=lambda e: (e.src, e.dst))]
    return {"nodes": nodes, "edges": edges}


def load_graph(path: str) -> TaskGraph:
    with open(path, "r") as f:
        return graph_from_dict(json.load(f))


def dump_graph(g: TaskGraph, path: str):
    with open(path, "w") as f:
        json.dump(graph_to_dict(g), f, indent=2)
        f.write("\n")


def degree_summary(g: TaskGraph) -> Dict[str, int]:
    """Small structural summary used in log lines"""
    return {"nodes": g.num_nodes, "edges": g.num_edges,
            "sources": len(g.sources()), "sinks": len(g.sinks())}
