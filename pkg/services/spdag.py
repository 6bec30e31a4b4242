"""
Series-Parallel Decomposition
This module grows forests of series-parallel decomposition trees for task DAGs with a
single source and a single sink:

1. A series operation is grown from a virtual edge into the start node
2. Nodes with several successors open a parallel operation whose branches (the wavefront)
   are grown until branches with equal endpoints can be merged
3. When no branch can change, one branch is cut into the forest and the expected
   indegree of its end node is reduced

Series-parallel inputs always produce a single tree; general DAGs produce a forest whose
trees partition the edge set.
"""
import json
import logging
import sys
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from services.taskgraph import CycleError, TaskGraph, bfs_order, normalize_endpoints

logger = logging.getLogger(__name__)

# Endpoint marker of the virtual edge into the start node; never a NodeId
EPSILON = -1


class DecompositionError(ValueError):
    """Input graph cannot be decomposed (multiple sources/sinks or cyclic)"""


class TreeKind(str, Enum):
    LEAF = "edge"
    SERIES = "S"
    PARALLEL = "P"


@dataclass
class DecompTree:
    """
    Decomposition tree with endpoints (start, end).

    outsize is the number of edges of the tree that end in `end`.
    """
    kind: TreeKind
    start: int
    end: int
    outsize: int
    children: List["DecompTree"] = field(default_factory=list)

    @property
    def endpoints(self) -> Tuple[int, int]:
        return (self.start, self.end)

    @property
    def is_leaf(self) -> bool:
        return self.kind is TreeKind.LEAF

    def __repr__(self) -> str:
        if self.is_leaf:
            return f"[{self.start},{self.end}]"
        inner = ", ".join(repr(c) for c in self.children)
        return f"{self.kind.value}({self.start},{self.end}: {inner})"


@dataclass(frozen=True)
class CutEvent:
    """One deadlocked wavefront and the branch that was cut from it"""
    node: int
    active: Tuple[Tuple[int, int], ...]
    cut: Tuple[int, int]


@dataclass
class DecompForest:
    trees: List[DecompTree] = field(default_factory=list)
    cuts: List[CutEvent] = field(default_factory=list)
    steps: int = 0

    def __len__(self) -> int:
        return len(self.trees)

    def __iter__(self) -> Iterator[DecompTree]:
        return iter(self.trees)


CutRule = Callable[[Sequence[DecompTree], np.random.Generator], int]


def random_cut(active: Sequence[DecompTree], rng: np.random.Generator) -> int:
    """Cut a uniformly chosen branch"""
    return int(rng.integers(len(active)))


def smallest_outsize_first(active: Sequence[DecompTree], rng: np.random.Generator) -> int:
    """Cut the branch with the fewest edges into its end node, ties by endpoints"""
    return min(range(len(active)), key=lambda i: (active[i].outsize, active[i].endpoints))


CUT_RULES: Dict[str, CutRule] = {
    "random": random_cut,
    "smallest-outsize-first": smallest_outsize_first,
}


def resolve_cut_rule(cut_rule: Union[str, CutRule]) -> CutRule:
    if callable(cut_rule):
        return cut_rule
    try:
        return CUT_RULES[cut_rule]
    except KeyError:
        raise DecompositionError(f"Unknown cut rule '{cut_rule}', expected one of {sorted(CUT_RULES)}")


def leaf(u: int, v: int) -> DecompTree:
    return DecompTree(TreeKind.LEAF, u, v, 1)


def series(first: DecompTree, second: DecompTree) -> DecompTree:
    """Chain two trees; `first` is extended in place when it already is a series node"""
    tail = second.children if second.kind is TreeKind.SERIES else [second]
    if first.kind is TreeKind.SERIES:
        first.children.extend(tail)
        first.end = second.end
        first.outsize = second.outsize
        return first
    return DecompTree(TreeKind.SERIES, first.start, second.end, second.outsize, [first] + list(tail))


def parallel(group: Sequence[DecompTree]) -> DecompTree:
    """Merge trees sharing both endpoints into one parallel node"""
    children: List[DecompTree] = []
    for t in group:
        if t.kind is TreeKind.PARALLEL:
            children.extend(t.children)
        else:
            children.append(t)
    first = group[0]
    return DecompTree(TreeKind.PARALLEL, first.start, first.end, sum(t.outsize for t in group), children)


class _GrowthState:
    """Mutable bookkeeping of one decomposition run"""

    def __init__(self, g: TaskGraph, cut_rule: CutRule, seed: int):
        self.g = g
        self.indegree = [g.in_degree(v) for v in g.nodes]
        self.cut_rule = cut_rule
        self.rng = np.random.default_rng(seed)
        self.steps = 0
        self.cuts: List[CutEvent] = []


def grow_series(t: DecompTree, forest: List[DecompTree], state: _GrowthState) -> DecompTree:
    """
    Extend t while every incoming edge of its end node belongs to t.

    Growth stops at the sink (the virtual end of the DAG) or when the end node still
    expects edges from outside t.
    """
    g = state.g
    v = t.end
    while v != EPSILON and state.indegree[v] <= t.outsize:
        succ = g.successors(v)
        if not succ:
            break
        state.steps += 1
        if len(succ) == 1:
            t = series(t, leaf(v, succ[0]))
        else:
            t = series(t, grow_parallel(v, forest, state))
        v = t.end
    return t


def _merge_same_endpoints(wavefront: List[DecompTree], state: _GrowthState) -> Tuple[List[DecompTree], bool]:
    groups: Dict[Tuple[int, int], List[DecompTree]] = {}
    for t in wavefront:
        groups.setdefault(t.endpoints, []).append(t)
    if len(groups) == len(wavefront):
        return wavefront, False
    merged = []
    for key in sorted(groups):
        group = groups[key]
        if len(group) >= 2:
            state.steps += 1
            merged.append(parallel(group))
        else:
            merged.append(group[0])
    return merged, True


def grow_parallel(v: int, forest: List[DecompTree], state: _GrowthState) -> DecompTree:
    """
    Grow the parallel operation opened at v and return the single tree it collapses to.

    Branches that deadlock are cut into `forest` according to the state's cut rule.
    """
    wavefront = [leaf(v, w) for w in state.g.successors(v)]
    while True:
        changed = True
        while changed:
            wavefront, changed = _merge_same_endpoints(wavefront, state)
            if len(wavefront) == 1:
                return wavefront[0]
            wavefront.sort(key=lambda t: t.endpoints)
            for i, t in enumerate(wavefront):
                end = t.end
                wavefront[i] = grow_series(t, forest, state)
                if wavefront[i].end != end:
                    changed = True

        wavefront.sort(key=lambda t: t.endpoints)
        active = tuple(t.endpoints for t in wavefront)
        cut = wavefront.pop(state.cut_rule(wavefront, state.rng))
        forest.append(cut)
        state.indegree[cut.end] -= cut.outsize
        state.steps += 1
        event = CutEvent(node=v, active=active, cut=cut.endpoints)
        state.cuts.append(event)
        logger.debug(f"Wavefront at node {v} deadlocked on {list(event.active)}, cut {cut!r}")


def _strip_virtual_start(t: DecompTree) -> Optional[DecompTree]:
    if t.is_leaf:
        return None
    rest = [c for c in t.children if c.start != EPSILON]
    if len(rest) == 1:
        return rest[0]
    return DecompTree(TreeKind.SERIES, rest[0].start, rest[-1].end, rest[-1].outsize, rest)


def decompose(g: TaskGraph, start: int, cut_rule: Union[str, CutRule] = "random", seed: int = 0) -> DecompForest:
    """
    Decompose a single-source, single-sink DAG into a forest of series-parallel trees.

    Args:
        g: The graph (use normalize_endpoints first)
        start: Its unique source
        cut_rule: Name from CUT_RULES or a callable picking the branch to cut
        seed: Seed of the generator handed to the cut rule

    Returns:
        A DecompForest whose trees partition g's edges; the core tree comes first
    """
    rule = resolve_cut_rule(cut_rule)
    try:
        bfs_order(g)
    except CycleError as e:
        raise DecompositionError(f"Cannot decompose a cyclic graph: {e}") from e
    sources, sinks = g.sources(), g.sinks()
    if sources != [start]:
        raise DecompositionError(f"Expected the single source {start}, found sources {sources}")
    if len(sinks) != 1:
        raise DecompositionError(f"Expected a single sink, found {sinks}")

    # Nesting depth of grow_series/grow_parallel is bounded by the edge count
    needed = 4 * g.num_edges + 200
    if sys.getrecursionlimit() < needed:
        sys.setrecursionlimit(needed)

    state = _GrowthState(g, rule, seed)
    cut_trees: List[DecompTree] = []
    core = grow_series(leaf(EPSILON, start), cut_trees, state)
    forest = DecompForest(steps=state.steps, cuts=state.cuts)
    core = _strip_virtual_start(core)
    if core is not None:
        forest.trees.append(core)
    forest.trees.extend(cut_trees)
    logger.debug(f"Decomposed {g.num_edges} edges into {len(forest)} trees "
                 f"with {len(forest.cuts)} cuts in {forest.steps} steps")
    return forest


def iter_leaves(t: DecompTree) -> Iterator[DecompTree]:
    stack = [t]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            yield node
        else:
            stack.extend(reversed(node.children))


def iter_subtrees(t: DecompTree) -> Iterator[DecompTree]:
    stack = [t]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def tree_edges(t: DecompTree) -> List[Tuple[int, int]]:
    return [(lf.start, lf.end) for lf in iter_leaves(t)]


def tree_nodes(t: DecompTree) -> Tuple[Set[int], Set[int]]:
    """
    Nodes of the subgraph represented by t.

    Returns:
        (inner, with_endpoints): all touched nodes without and with t's endpoints
    """
    with_endpoints: Set[int] = set()
    for lf in iter_leaves(t):
        with_endpoints.add(lf.start)
        with_endpoints.add(lf.end)
    with_endpoints.discard(EPSILON)
    inner = with_endpoints - {t.start, t.end}
    return inner, with_endpoints


def tree_violations(t: DecompTree) -> List[str]:
    """Structural invariants of a decomposition tree; empty when all hold"""
    problems = []
    for node in iter_subtrees(t):
        label = repr(node) if node.is_leaf else f"{node.kind.value}({node.start},{node.end})"
        if node.is_leaf:
            if node.children:
                problems.append(f"leaf {label} has children")
            continue
        kids = node.children
        if len(kids) < 2:
            problems.append(f"{label} has fewer than two children")
            continue
        if node.kind is TreeKind.SERIES:
            if (kids[0].start, kids[-1].end) != node.endpoints:
                problems.append(f"{label} endpoints differ from its chain")
            for a, b in zip(kids, kids[1:]):
                if a.end != b.start:
                    problems.append(f"{label} chain broken between {a.endpoints} and {b.endpoints}")
        elif any(k.endpoints != node.endpoints for k in kids):
            problems.append(f"{label} has a child with different endpoints")
        recount = sum(1 for lf in iter_leaves(node) if lf.end == node.end)
        if recount != node.outsize:
            problems.append(f"{label} outsize {node.outsize} != {recount}")
    return problems


def is_series_parallel(g: TaskGraph) -> bool:
    """True iff the (normalized) graph decomposes into a single tree"""
    normalized, start, _ = normalize_endpoints(g, 1.0)
    return len(decompose(normalized, start, "smallest-outsize-first", 0)) == 1


def tree_to_dict(t: DecompTree) -> Dict:
    if t.is_leaf:
        return {"kind": t.kind.value, "edge": [t.start, t.end]}
    return {
        "kind": t.kind.value,
        "start": t.start,
        "end": t.end,
        "outsize": t.outsize,
        "children": [tree_to_dict(c) for c in t.children],
    }


def forest_to_dict(forest: DecompForest) -> Dict:
    return {
        "trees": [tree_to_dict(t) for t in forest.trees],
        "cuts": [{"node": c.node, "active": [list(a) for a in c.active], "cut": list(c.cut)}
                 for c in forest.cuts],
    }


def forest_to_json(forest: DecompForest) -> str:
    return json.dumps(forest_to_dict(forest), indent=2) + "\n"


def forest_to_dot(forest: DecompForest) -> str:
    """Graphviz rendering of the forest: series nodes 'S', parallel nodes 'P', leaves 'u-v'"""
    lines = ["digraph forest {"]
    counter = 0
    for index, root in enumerate(forest.trees):
        lines.append(f"  subgraph cluster_{index} {{")
        lines.append(f'    label="tree {index}";')
        stack = [(root, None)]
        while stack:
            node, parent = stack.pop()
            name = f"n{counter}"
            counter += 1
            if node.is_leaf:
                lines.append(f'    {name} [label="{node.start}-{node.end}", shape=box];')
            elif node.kind is TreeKind.PARALLEL:
                lines.append(f'    {name} [label="P {node.start},{node.end}", shape=circle];')
            else:
                lines.append(f'    {name} [label="S {node.start},{node.end}", shape=ellipse];')
            if parent is not None:
                lines.append(f"    {parent} -> {name};")
            for child in reversed(node.children):
                stack.append((child, name))
        lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"
