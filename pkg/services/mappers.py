"""
Decomposition Mapping Service
This module maps task graphs onto heterogeneous platforms by greedy subgraph replacement:

1. Every task starts on the platform's default (CPU) unit
2. Each candidate move (subgraph, target unit) is scored with a full model-based evaluation
3. The best strictly improving move is applied
4. Steps 2-3 repeat until no move improves or the iteration cap is reached

Subgraph sets come from single nodes or from series-parallel decomposition forests.
The gamma-threshold / FirstFit variant replaces the exhaustive sweep by a priority queue of
expected improvements. HEFT, PEFT and the genetic algorithm are reachable through the
same registry so every algorithm is scored by one evaluator.
"""
import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import config
from services import genetic, list_scheduling
from services.evaluator import EvalConfig, MakespanEvaluator, Mapping, ScheduledTask
from services.platform import Platform
from services.spdag import CutRule, TreeKind, decompose, iter_subtrees, tree_nodes
from services.taskgraph import TaskGraph, normalize_endpoints

logger = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 10


class MappingFormatError(ValueError):
    """Mapping JSON does not match the accepted schema"""


@dataclass(frozen=True)
class SubgraphSet:
    """Deduplicated node sets, each a sorted tuple, in lexicographic order"""
    subgraphs: Tuple[Tuple[int, ...], ...]

    @classmethod
    def from_sets(cls, sets) -> "SubgraphSet":
        unique = {tuple(sorted(s)) for s in sets if s}
        return cls(tuple(sorted(unique)))

    def __len__(self) -> int:
        return len(self.subgraphs)

    def __iter__(self):
        return iter(self.subgraphs)


@dataclass
class MoveCandidate:
    subgraph: Tuple[int, ...]
    target_unit: int
    expected_improvement: float = math.nan


@dataclass(frozen=True)
class MapperConfig:
    gamma: float = config.GAMMA
    iteration_cap: Optional[int] = None
    # drives the cut rule when the subgraph set comes from a decomposition
    seed: int = config.DEFAULT_SEED
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        if not self.gamma >= 1.0:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if self.iteration_cap is not None and self.iteration_cap < 0:
            raise ValueError("iteration_cap must be >= 0")


@dataclass
class MappingResult:
    """Outcome of one mapper run, as reported by the CLI, HTTP API and benchmarks"""
    mapping: Mapping
    algorithm: str
    seed: int
    makespan: float
    internal_makespan: float
    evaluations: int = 0
    iterations: int = 0
    schedule: Optional[List[ScheduledTask]] = None
    history: List[float] = field(default_factory=list)
    # wall-clock time of the mapper alone, without the reporting evaluation
    mapper_ms: float = 0.0


def single_node_subgraphs(g: TaskGraph) -> SubgraphSet:
    """All singleton subgraphs (virtual endpoint tasks excluded)"""
    return SubgraphSet.from_sets([v] for v in g.real_nodes())


def series_parallel_subgraphs(g: TaskGraph, cut_rule: Union[str, CutRule] = config.CUT_RULE,
                              seed: int = config.DEFAULT_SEED) -> SubgraphSet:
    """
    Singletons plus, for every tree of the decomposition forest, the inner nodes of each
    series operation and the endpoint-inclusive nodes of each parallel operation.
    """
    normalized, start, _ = normalize_endpoints(g, config.DEFAULT_EDGE_BYTES)
    forest = decompose(normalized, start, cut_rule, seed)
    excluded = normalized.virtual
    sets = [[v] for v in g.real_nodes()]
    for tree in forest:
        for node in iter_subtrees(tree):
            if node.kind is TreeKind.SERIES:
                members, _ = tree_nodes(node)
            elif node.kind is TreeKind.PARALLEL:
                _, members = tree_nodes(node)
            else:
                continue
            sets.append(members - excluded)
    subgraphs = SubgraphSet.from_sets(sets)
    logger.debug(f"Series-parallel subgraph set: {len(subgraphs)} subgraphs from {len(forest)} trees")
    return subgraphs


class GreedyMapper:
    """
    Greedy subgraph-replacement engine over a fixed subgraph set.

    Moves are only applied when they strictly lower the deterministic internal cost,
    so every run terminates and never ends worse than the all-default mapping.
    """

    def __init__(self, g: TaskGraph, p: Platform, subgraphs: SubgraphSet, cfg: Optional[MapperConfig] = None,
                 evaluator: Optional[MakespanEvaluator] = None):
        self.g = g
        self.platform = p
        self.cfg = cfg or MapperConfig()
        self.evaluator = evaluator or MakespanEvaluator(g, p, self.cfg.eval)
        self.candidates = [MoveCandidate(sub, unit) for sub in subgraphs for unit in sorted(p.unit_ids)]
        self.iterations = 0
        self.cap = self.cfg.iteration_cap if self.cfg.iteration_cap is not None else len(g.real_nodes())
        self.mapping = self.evaluator.default_mapping()
        self.cost = self.evaluator.cost(self.mapping)
        self.initial_cost = self.cost

    @property
    def evaluations(self) -> int:
        # the starting point's own evaluation is not a candidate evaluation
        return self.evaluator.calls - 1

    def _score(self, candidate: MoveCandidate) -> Tuple[Mapping, float]:
        moved = self.mapping.moved(candidate.subgraph, candidate.target_unit)
        new_cost = self.evaluator.cost(moved)
        candidate.expected_improvement = self.cost - new_cost if math.isfinite(new_cost) else -math.inf
        return moved, new_cost

    def _apply(self, candidate: MoveCandidate, moved: Mapping, new_cost: float):
        logger.debug(f"Iteration {self.iterations + 1}: move {list(candidate.subgraph)} to unit "
                     f"{candidate.target_unit}, cost {self.cost:.6g} -> {new_cost:.6g}")
        self.mapping = moved
        self.cost = new_cost
        self.iterations += 1

    def _full_sweep(self) -> Optional[Tuple[MoveCandidate, Mapping, float]]:
        best = None
        for candidate in self.candidates:
            moved, new_cost = self._score(candidate)
            if new_cost < self.cost and (best is None or new_cost < best[2]):
                best = (candidate, moved, new_cost)
        return best

    def run_exhaustive(self) -> Mapping:
        """Basic variant: evaluate all |S| x m moves every iteration and apply the best"""
        while self.iterations < self.cap:
            best = self._full_sweep()
            if best is None:
                break
            self._apply(*best)
        return self.mapping

    def run_threshold(self) -> Mapping:
        """
        Gamma-threshold variant (gamma = 1 is FirstFit).

        After a full first sweep, candidates are re-evaluated best-expected-first. A found
        improvement is applied as soon as no queued candidate expects more than
        found / gamma. Without any improvement the queue drains completely, so every move is
        re-evaluated against the final mapping before convergence is declared.
        Many small first-found moves can cost more evaluations in total than the exhaustive
        variant spends on one graph.
        """
        if self.iterations >= self.cap:
            return self.mapping
        best = self._full_sweep()
        if best is None:
            return self.mapping
        self._apply(*best)

        gamma = self.cfg.gamma
        heap = [(-c.expected_improvement, i) for i, c in enumerate(self.candidates)]
        heapq.heapify(heap)
        while self.iterations < self.cap:
            found = None
            refreshed = []
            while heap:
                if found is not None and -heap[0][0] <= (self.cost - found[2]) / gamma:
                    break
                _, index = heapq.heappop(heap)
                candidate = self.candidates[index]
                moved, new_cost = self._score(candidate)
                refreshed.append((-candidate.expected_improvement, index))
                if new_cost < self.cost and (found is None or new_cost < found[2]):
                    found = (candidate, moved, new_cost)
            for entry in refreshed:
                heapq.heappush(heap, entry)
            if found is None:
                break
            self._apply(*found)
        return self.mapping


def decomposition_map(g: TaskGraph, p: Platform, S: SubgraphSet, cfg: Optional[MapperConfig] = None) -> Mapping:
    return GreedyMapper(g, p, S, cfg).run_exhaustive()


def threshold_map(g: TaskGraph, p: Platform, S: SubgraphSet, cfg: Optional[MapperConfig] = None) -> Mapping:
    return GreedyMapper(g, p, S, cfg).run_threshold()


def brute_force_map(g: TaskGraph, p: Platform, cfg: Optional[MapperConfig] = None) -> Tuple[Mapping, float]:
    """
    Exhaustive optimum under the internal cost, ties broken by lexicographic assignment.

    Raises:
        ValueError: more than BRUTE_FORCE_LIMIT tasks
    """
    cfg = cfg or MapperConfig()
    if g.num_nodes > BRUTE_FORCE_LIMIT:
        raise ValueError(f"Exhaustive mapping is limited to {BRUTE_FORCE_LIMIT} tasks, got {g.num_nodes}")
    evaluator = MakespanEvaluator(g, p, cfg.eval)
    best, best_cost = None, math.inf
    for assignment in itertools.product(sorted(p.unit_ids), repeat=g.num_nodes):
        candidate = Mapping(assignment)
        cost = evaluator.cost(candidate)
        if cost < best_cost:
            best, best_cost = candidate, cost
    return best, best_cost


def _greedy(kind: str, firstfit: bool):
    def run(g: TaskGraph, p: Platform, seed: int, eval_cfg: EvalConfig, gamma: float, **_) -> MappingResult:
        cfg = MapperConfig(gamma=gamma, seed=seed, eval=eval_cfg)
        if kind == "single_node":
            subgraphs = single_node_subgraphs(g)
        else:
            subgraphs = series_parallel_subgraphs(g, config.CUT_RULE, cfg.seed)
        mapper = GreedyMapper(g, p, subgraphs, cfg)
        mapping = mapper.run_threshold() if firstfit else mapper.run_exhaustive()
        return MappingResult(mapping=mapping, algorithm="", seed=seed, makespan=math.nan,
                             internal_makespan=mapper.cost, evaluations=mapper.evaluations,
                             iterations=mapper.iterations)
    return run


def _list_scheduler(name: str):
    def run(g: TaskGraph, p: Platform, seed: int, eval_cfg: EvalConfig, **_) -> MappingResult:
        scheduler = list_scheduling.heft if name == "heft" else list_scheduling.peft
        mapping, schedule = scheduler(g, p, eval_cfg.source_input_bytes)
        return MappingResult(mapping=mapping, algorithm="", seed=seed, makespan=math.nan,
                             internal_makespan=math.nan, evaluations=0,
                             iterations=0, schedule=schedule)
    return run


def _genetic(g: TaskGraph, p: Platform, seed: int, eval_cfg: EvalConfig, ga=None, **_) -> MappingResult:
    ga_cfg = replace(ga, seed=seed) if ga is not None else genetic.GAConfig(seed=seed)
    optimizer = genetic.GeneticMapper(g, p, ga_cfg, eval_cfg)
    mapping = optimizer.run()
    return MappingResult(mapping=mapping, algorithm="", seed=seed, makespan=math.nan,
                         internal_makespan=optimizer.best_fitness, evaluations=optimizer.evaluator.calls,
                         iterations=len(optimizer.history) - 1, history=list(optimizer.history))


def _exhaustive(g: TaskGraph, p: Platform, seed: int, eval_cfg: EvalConfig, **_) -> MappingResult:
    cfg = MapperConfig(seed=seed, eval=eval_cfg)
    mapping, cost = brute_force_map(g, p, cfg)
    return MappingResult(mapping=mapping, algorithm="", seed=seed, makespan=math.nan,
                         internal_makespan=cost, evaluations=len(p.units) ** g.num_nodes)


ALGORITHMS: Dict[str, Callable[..., MappingResult]] = {
    "single_node": _greedy("single_node", firstfit=False),
    "series_parallel": _greedy("series_parallel", firstfit=False),
    "sn_firstfit": _greedy("single_node", firstfit=True),
    "sp_firstfit": _greedy("series_parallel", firstfit=True),
    "heft": _list_scheduler("heft"),
    "peft": _list_scheduler("peft"),
    "nsga2": _genetic,
}

# Available to `map`, never part of benchmark sweeps
EXTRA_ALGORITHMS: Dict[str, Callable[..., MappingResult]] = {
    "exhaustive": _exhaustive,
}


def run_algorithm(name: str, g: TaskGraph, p: Platform, seed: int = config.DEFAULT_SEED,
                  eval_cfg: Optional[EvalConfig] = None, gamma: float = config.GAMMA,
                  ga=None) -> MappingResult:
    """
    Run a registered mapper and re-score its mapping with the reporting evaluator.

    Args:
        name: Registry key (see ALGORITHMS and EXTRA_ALGORITHMS)
        g: Task graph
        p: Platform
        seed: Seed for decomposition cuts and the genetic algorithm
        eval_cfg: Evaluation settings shared by search and reporting
        gamma: Threshold of the FirstFit variants
        ga: Optional GAConfig for nsga2

    Returns:
        MappingResult with `makespan` set to the reporting makespan
    """
    runner = ALGORITHMS.get(name) or EXTRA_ALGORITHMS.get(name)
    if runner is None:
        raise ValueError(f"Unknown algorithm '{name}', expected one of "
                         f"{sorted(ALGORITHMS) + sorted(EXTRA_ALGORITHMS)}")
    eval_cfg = eval_cfg or EvalConfig(seed=seed)
    logger.info(f"Running {name} on {g.num_nodes} tasks / {g.num_edges} edges (seed {seed})")
    started = time.perf_counter()
    result = runner(g, p, seed=seed, eval_cfg=eval_cfg, gamma=gamma, ga=ga)
    result.mapper_ms = (time.perf_counter() - started) * 1000.0
    result.algorithm = name
    reporting = MakespanEvaluator(g, p, eval_cfg)
    if math.isnan(result.internal_makespan):
        result.internal_makespan = reporting.cost(result.mapping)
    result.makespan = reporting.evaluate(result.mapping)
    logger.info(f"{name} finished in {result.mapper_ms:.1f} ms: makespan {result.makespan:.6g}, "
                f"{result.evaluations} evaluations, {result.iterations} iterations")
    return result


def mapping_to_dict(result: MappingResult) -> Dict[str, Any]:
    return {
        "assignment": [{"task": v, "unit": u} for v, u in enumerate(result.mapping.assignment)],
        "algorithm": result.algorithm,
        "seed": result.seed,
        "makespan": result.makespan,
    }


def mapping_from_dict(doc: Dict[str, Any], num_tasks: Optional[int] = None) -> Tuple[Mapping, Dict[str, Any]]:
    """
    Parse mapping JSON.

    Returns:
        (mapping, metadata) where metadata holds algorithm, seed and makespan when present
    """
    if not isinstance(doc, dict) or "assignment" not in doc:
        raise MappingFormatError("Mapping document must be an object with an 'assignment' list")
    unknown = set(doc) - {"assignment", "algorithm", "seed", "makespan"}
    if unknown:
        raise MappingFormatError(f"Unknown mapping fields {sorted(unknown)}")
    units: Dict[int, int] = {}
    for entry in doc["assignment"]:
        if not isinstance(entry, dict) or set(entry) != {"task", "unit"}:
            raise MappingFormatError(f"Assignment entries need exactly 'task' and 'unit': {entry!r}")
        task = int(entry["task"])
        if task in units:
            raise MappingFormatError(f"Task {task} assigned twice")
        units[task] = int(entry["unit"])
    n = len(units) if num_tasks is None else num_tasks
    if set(units) != set(range(n)):
        raise MappingFormatError(f"Assignment must cover tasks 0..{n - 1} exactly")
    metadata = {k: doc[k] for k in ("algorithm", "seed", "makespan") if k in doc}
    return Mapping(tuple(units[v] for v in range(n))), metadata
