"""
Task Graph Generators
This module produces the graphs the mappers are benchmarked on:

1. Random series-parallel graphs grown from a single edge by series/parallel operations
2. Almost series-parallel graphs by inserting extra edges along a random topological order
3. Random task attributes (lognormal complexity and streamability, bimodal parallelizability)
4. Task graphs recreated from WfCommons-style workflow instances

Everything is driven by explicit seeds; the same config and seed give the same graph.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

import config
from services.platform import TaskAttributes
from services.taskgraph import CycleError, Edge, TaskGraph, bfs_order, random_topological_order

logger = logging.getLogger(__name__)

EDGE_INSERT_RETRIES = 64


class GenerationError(ValueError):
    """Invalid generator configuration or impossible request"""


class WorkflowFormatError(ValueError):
    """Workflow document outside the accepted schema subset"""


@dataclass(frozen=True)
class GenConfig:
    n_tasks: int
    series_parallel_ratio: Tuple[int, int] = (1, 2)
    extra_edges: int = 0
    edge_bytes: float = config.DEFAULT_EDGE_BYTES
    seed: int = config.DEFAULT_SEED

    def __post_init__(self):
        if self.n_tasks < 2:
            raise GenerationError(f"n_tasks must be >= 2, got {self.n_tasks}")
        if len(self.series_parallel_ratio) != 2 or min(self.series_parallel_ratio) < 1:
            raise GenerationError(f"Ratio components must be >= 1, got {self.series_parallel_ratio}")
        if self.extra_edges < 0:
            raise GenerationError("extra_edges must be >= 0")
        if not self.edge_bytes > 0:
            raise GenerationError("edge_bytes must be > 0")


@dataclass(frozen=True)
class AttributeDistribution:
    lognormal_mu: float = 2.0
    lognormal_sigma: float = 0.5
    perfect_parallel_prob: float = 0.5
    area_per_complexity: float = config.AREA_PER_COMPLEXITY

    def __post_init__(self):
        if not self.lognormal_sigma > 0:
            raise GenerationError("lognormal_sigma must be > 0")
        if not 0.0 <= self.perfect_parallel_prob <= 1.0:
            raise GenerationError("perfect_parallel_prob must be in [0, 1]")
        if not self.area_per_complexity >= 0:
            raise GenerationError("area_per_complexity must be >= 0")


@dataclass(frozen=True)
class ConstructionStep:
    """One operation of the SP construction; `node` is the inserted node of a series step"""
    op: str
    edge: Tuple[int, int]
    node: Optional[int] = None


@dataclass
class ConstructionTrace:
    steps: List[ConstructionStep] = field(default_factory=list)
    merged_edges: int = 0

    @property
    def series_steps(self) -> int:
        return sum(1 for s in self.steps if s.op == "S")

    @property
    def parallel_steps(self) -> int:
        return sum(1 for s in self.steps if s.op == "P")


def random_sp_graph(cfg: GenConfig) -> Tuple[TaskGraph, ConstructionTrace]:
    """
    Grow a two-terminal series-parallel graph from the single edge 0 -> 1.

    A series step subdivides a random edge with a new node, a parallel step duplicates a
    random edge. Steps are drawn in the configured series:parallel ratio until n_tasks
    nodes exist; duplicated edges are merged at the end. Node 0 is the source, node 1 the sink.
    """
    rng = np.random.default_rng(cfg.seed)
    series_weight, parallel_weight = cfg.series_parallel_ratio
    series_prob = series_weight / (series_weight + parallel_weight)
    edges: List[Tuple[int, int]] = [(0, 1)]
    trace = ConstructionTrace()
    num_nodes = 2
    while num_nodes < cfg.n_tasks:
        index = int(rng.integers(len(edges)))
        u, v = edges[index]
        if rng.random() < series_prob:
            w = num_nodes
            num_nodes += 1
            edges[index] = (u, w)
            edges.append((w, v))
            trace.steps.append(ConstructionStep("S", (u, v), w))
        else:
            edges.append((u, v))
            trace.steps.append(ConstructionStep("P", (u, v)))
    g = TaskGraph.from_edges(num_nodes, ((u, v, cfg.edge_bytes) for u, v in edges))
    trace.merged_edges = len(edges) - g.num_edges
    logger.debug(f"Generated SP graph with {g.num_nodes} nodes, {g.num_edges} edges "
                 f"({trace.series_steps} series, {trace.parallel_steps} parallel steps)")
    return g, trace


def add_random_edges(g: TaskGraph, k: int, seed: int,
                     edge_bytes: float = config.DEFAULT_EDGE_BYTES) -> TaskGraph:
    """
    Insert k new edges oriented along a random topological order, so the result stays acyclic.

    Raises:
        GenerationError: k < 0 or fewer than k node pairs are still unconnected
    """
    if k < 0:
        raise GenerationError("k must be >= 0")
    if k == 0:
        return g
    n = g.num_nodes
    existing = {(e.src, e.dst) for e in g.edges}
    if n * (n - 1) // 2 - len(existing) < k:
        raise GenerationError(f"Graph with {n} nodes and {len(existing)} edges cannot take {k} more edges")

    rng = np.random.default_rng(seed)
    position = {v: i for i, v in enumerate(random_topological_order(g, seed))}
    by_position = sorted(g.nodes, key=position.get)
    added: List[Edge] = []
    for _ in range(k):
        pair = None
        for _ in range(EDGE_INSERT_RETRIES):
            a, b = (int(x) for x in rng.choice(n, size=2, replace=False))
            if position[a] > position[b]:
                a, b = b, a
            if (a, b) not in existing:
                pair = (a, b)
                break
        if pair is None:
            free = [(a, b) for i, a in enumerate(by_position) for b in by_position[i + 1:] if (a, b) not in existing]
            pair = free[int(rng.integers(len(free)))]
            logger.warning(f"Edge insertion fell back to enumeration after {EDGE_INSERT_RETRIES} retries")
        existing.add(pair)
        added.append(Edge(pair[0], pair[1], edge_bytes))
    return TaskGraph(num_nodes=n, edges=g.edges + tuple(added), attributes=g.attributes,
                     names=g.names, virtual=g.virtual)


def augment_attributes(g: TaskGraph, dist: Optional[AttributeDistribution] = None, seed: int = 0,
                       keep_complexity: bool = False) -> TaskGraph:
    """
    Draw per-task attributes.

    complexity and streamability ~ lognormal(mu, sigma); parallelizability is 1 with
    probability perfect_parallel_prob and uniform in [0, 1] otherwise; area is
    area_per_complexity * complexity. With keep_complexity the existing complexities
    (e.g. derived from workflow runtimes) are kept. Virtual tasks are left untouched.
    """
    dist = dist or AttributeDistribution()
    rng = np.random.default_rng(seed)
    n = g.num_nodes
    complexity = rng.lognormal(dist.lognormal_mu, dist.lognormal_sigma, n)
    streamability = rng.lognormal(dist.lognormal_mu, dist.lognormal_sigma, n)
    perfect = rng.random(n) < dist.perfect_parallel_prob
    parallelizability = np.where(perfect, 1.0, rng.random(n))
    if keep_complexity:
        complexity = np.array([a.complexity for a in g.attributes])

    attributes = []
    for v in g.nodes:
        if v in g.virtual:
            attributes.append(g.attributes[v])
            continue
        attributes.append(TaskAttributes(
            complexity=float(complexity[v]),
            parallelizability=float(parallelizability[v]),
            streamability=float(streamability[v]),
            area=float(dist.area_per_complexity * complexity[v]),
        ))
    return g.with_attributes(attributes)


def generate(cfg: GenConfig, dist: Optional[AttributeDistribution] = None) -> TaskGraph:
    """SP graph, optional extra edges and attributes, all derived from cfg.seed"""
    g, _ = random_sp_graph(cfg)
    g = add_random_edges(g, cfg.extra_edges, cfg.seed, cfg.edge_bytes)
    return augment_attributes(g, dist, cfg.seed)


def _tasks_of(doc: Dict[str, Any]) -> List[Dict[str, Any]]:
    if not isinstance(doc, dict):
        raise WorkflowFormatError("Workflow document must be an object")
    workflow = doc.get("workflow", doc)
    if not isinstance(workflow, dict):
        raise WorkflowFormatError("'workflow' must be an object")
    tasks = workflow.get("tasks")
    if tasks is None and isinstance(workflow.get("specification"), dict):
        tasks = _split_schema_tasks(workflow)
    if not isinstance(tasks, list) or not tasks:
        raise WorkflowFormatError("Workflow has no 'tasks' list")
    return tasks


def _split_schema_tasks(workflow: Dict[str, Any]) -> List[Dict[str, Any]]:
    """
    Flatten the specification/execution layout of newer WfCommons instances.

    Structure lives in specification.tasks (inputFiles/outputFiles name ids from
    specification.files), runtimes in execution.tasks.
    """
    spec = workflow["specification"]
    tasks = spec.get("tasks")
    if not isinstance(tasks, list):
        return tasks
    files: Dict[str, Dict[str, Any]] = {}
    for entry in spec.get("files", []):
        if not isinstance(entry, dict) or not isinstance(entry.get("id"), str):
            raise WorkflowFormatError(f"File entry without a string 'id': {entry!r}")
        files[entry["id"]] = entry
    execution = workflow.get("execution") or {}
    runs = {_task_id(run): run for run in execution.get("tasks", []) if isinstance(run, dict)}

    flat = []
    for task in tasks:
        if not isinstance(task, dict):
            raise WorkflowFormatError(f"Task entry must be an object: {task!r}")
        tid = _task_id(task)
        entries = []
        for link, key in (("input", "inputFiles"), ("output", "outputFiles")):
            for fid in task.get(key, []):
                if fid not in files:
                    raise WorkflowFormatError(f"Task {tid!r} references unknown file {fid!r}")
                entries.append({**files[fid], "link": link, "name": fid})
        merged = {"id": tid, "parents": task.get("parents", []), "children": task.get("children", []),
                  "files": entries}
        run = runs.get(tid, {})
        for key in ("runtimeInSeconds", "runtime"):
            if key in run:
                merged["runtimeInSeconds"] = run[key]
                break
        flat.append(merged)
    return flat


def _task_id(task: Dict[str, Any]) -> str:
    for key in ("id", "name"):
        if isinstance(task.get(key), str):
            return task[key]
    raise WorkflowFormatError(f"Task without a string 'id' or 'name': {task!r}")


def _file_size(entry: Dict[str, Any]) -> float:
    for key in ("sizeInBytes", "size"):
        if key in entry:
            size = entry[key]
            if not isinstance(size, (int, float)) or isinstance(size, bool) or size < 0:
                raise WorkflowFormatError(f"File {entry.get('name')!r} has invalid size {size!r}")
            return float(size)
    raise WorkflowFormatError(f"File entry without 'sizeInBytes': {entry!r}")


def ingest_workflow(doc: Dict[str, Any], reference_rate: float = config.REFERENCE_RATE,
                    source_bytes: float = config.DEFAULT_EDGE_BYTES,
                    external_inputs: bool = False) -> TaskGraph:
    """
    Recreate a task graph from a WfCommons-style workflow instance.

    Accepted subset: tasks with an `id` (or `name`), optional `parents`/`children`, a
    `runtime` (or `runtimeInSeconds`) or an `ops` count, and `files` entries with
    `link` (input/output), `name` (or `id`) and `sizeInBytes`. Each producer -> consumer
    file relation becomes an edge carrying the file size (several files between the same
    pair add up); parent links without a file carry source_bytes. Complexity is
    runtime * reference_rate / input bytes (or ops / input bytes). Parallelizability and
    streamability keep their defaults for augment_attributes to fill.
    The newer layout that splits a workflow into `specification` (tasks with
    inputFiles/outputFiles, plus a files table) and `execution` (runtimes) is flattened first.

    Args:
        doc: Parsed workflow JSON
        reference_rate: Operations per second behind the declared runtimes
        source_bytes: Input volume of tasks without predecessors
        external_inputs: Accept input files that no task produces (workflow-level inputs)

    Raises:
        WorkflowFormatError: schema violation, dangling file reference or cycle
    """
    tasks = _tasks_of(doc)
    index: Dict[str, int] = {}
    for task in tasks:
        if not isinstance(task, dict):
            raise WorkflowFormatError(f"Task entry must be an object: {task!r}")
        tid = _task_id(task)
        if tid in index:
            raise WorkflowFormatError(f"Duplicate task id {tid!r}")
        index[tid] = len(index)

    producers: Dict[str, Tuple[int, float]] = {}
    consumers: List[Tuple[str, int]] = []
    for task in tasks:
        v = index[_task_id(task)]
        for entry in task.get("files", []):
            if not isinstance(entry, dict) or entry.get("link") not in ("input", "output"):
                raise WorkflowFormatError(f"Task {_task_id(task)!r}: file entry needs link input/output: {entry!r}")
            name = entry.get("name", entry.get("id"))
            if not isinstance(name, str):
                raise WorkflowFormatError(f"Task {_task_id(task)!r}: file entry without a name")
            if entry["link"] == "output":
                if name in producers:
                    raise WorkflowFormatError(f"File {name!r} is produced by more than one task")
                producers[name] = (v, _file_size(entry))
            else:
                _file_size(entry)
                consumers.append((name, v))

    sizes: Dict[Tuple[int, int], float] = {}
    for name, v in consumers:
        if name not in producers:
            if external_inputs:
                continue
            raise WorkflowFormatError(f"File {name!r} is consumed but never produced")
        u, size = producers[name]
        if u != v:
            sizes[(u, v)] = sizes.get((u, v), 0.0) + size

    for task in tasks:
        v = index[_task_id(task)]
        for key, outgoing in (("parents", False), ("children", True)):
            for other in task.get(key, []):
                if other not in index:
                    raise WorkflowFormatError(f"Task {_task_id(task)!r} references unknown task {other!r}")
                pair = (v, index[other]) if outgoing else (index[other], v)
                sizes.setdefault(pair, source_bytes)

    zero = [pair for pair, size in sizes.items() if size <= 0]
    if zero:
        logger.warning(f"{len(zero)} workflow edges carry no data; using {source_bytes:g} bytes")
        for pair in zero:
            sizes[pair] = source_bytes

    names = [None] * len(index)
    for tid, v in index.items():
        names[v] = tid
    skeleton = TaskGraph(num_nodes=len(index), edges=tuple(Edge(u, v, b) for (u, v), b in sorted(sizes.items())),
                         names=tuple(names))
    try:
        bfs_order(skeleton)
    except CycleError as e:
        raise WorkflowFormatError(f"Workflow is cyclic: {e}") from e

    attributes = []
    for task in tasks:
        v = index[_task_id(task)]
        input_bytes = skeleton.input_bytes(v, source_bytes)
        if "ops" in task:
            work = float(task["ops"])
        else:
            runtime = task.get("runtime", task.get("runtimeInSeconds"))
            if runtime is None:
                raise WorkflowFormatError(f"Task {_task_id(task)!r} has neither 'runtime' nor 'ops'")
            work = float(runtime) * reference_rate
        if work < 0:
            raise WorkflowFormatError(f"Task {_task_id(task)!r} has negative work")
        attributes.append(TaskAttributes(complexity=work / input_bytes if input_bytes > 0 else 0.0))
    g = skeleton.with_attributes(attributes)
    logger.info(f"Ingested workflow with {g.num_nodes} tasks and {g.num_edges} edges")
    return g


def load_workflow(path: str, **kwargs) -> TaskGraph:
    try:
        with open(path, "r") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise WorkflowFormatError(f"Workflow file {path} is not valid JSON: {e}") from e
    return ingest_workflow(doc, **kwargs)
