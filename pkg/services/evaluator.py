"""
Makespan Evaluator
This module simulates a (graph, platform, mapping) triple under a schedule order:

1. Linear chains of tasks on the same FPGA are coalesced into streaming composites
2. Each unit executes one (composite) task at a time in the order induced by the schedule
3. A task starts once its unit is free and all predecessor data has arrived

The internal cost used by search is the breadth-first makespan; the reporting metric is
the minimum over the breadth-first schedule and a number of seeded random schedules.
"""
import io
import json
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import config
from services.platform import Platform, compute_time, transfer_time
from services.taskgraph import TaskGraph, bfs_order, is_topological, random_topological_order

logger = logging.getLogger(__name__)

# Random schedule k of seed s is drawn with seed s * stride + k
SCHEDULE_SEED_STRIDE = 1_000_003


class InfeasibleMappingError(ValueError):
    """Mapping exceeds an FPGA's area or names an unknown unit"""


class ScheduleOrderError(ValueError):
    """Schedule order is not a topological permutation of the tasks"""


@dataclass(frozen=True)
class Mapping:
    """Total assignment of tasks (by index) to processing-unit ids"""
    assignment: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "assignment", tuple(int(u) for u in self.assignment))

    @classmethod
    def uniform(cls, num_tasks: int, unit_id: int) -> "Mapping":
        return cls(tuple([unit_id] * num_tasks))

    def __len__(self) -> int:
        return len(self.assignment)

    def __getitem__(self, task: int) -> int:
        return self.assignment[task]

    def moved(self, tasks, unit_id: int) -> "Mapping":
        assignment = list(self.assignment)
        for v in tasks:
            assignment[v] = unit_id
        return Mapping(tuple(assignment))


@dataclass(frozen=True)
class EvalConfig:
    random_schedules: int = config.RANDOM_SCHEDULES
    seed: int = config.DEFAULT_SEED
    internal_schedules: int = config.INTERNAL_SCHEDULES
    source_input_bytes: float = config.DEFAULT_EDGE_BYTES
    coalesce: bool = True

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.random_schedules < 0:
            raise ValueError("random_schedules must be >= 0")
        if self.internal_schedules < 1:
            raise ValueError("internal_schedules must be >= 1")


@dataclass(frozen=True)
class ScheduledTask:
    task: int
    unit: int
    start: float
    finish: float


@dataclass(frozen=True)
class EvalResult:
    makespan: float
    start: Tuple[float, ...]
    finish: Tuple[float, ...]
    units: Tuple[int, ...]
    schedule_used: str
    groups: Tuple[Tuple[int, ...], ...] = ()

    def timeline(self) -> List[ScheduledTask]:
        return [ScheduledTask(v, self.units[v], self.start[v], self.finish[v]) for v in range(len(self.start))]


@dataclass
class ExecutionGraph:
    """Coalesced view of a mapped graph: streaming chains become one composite"""
    groups: List[List[int]]
    group_of: List[int]

    def composites(self) -> List[List[int]]:
        return [members for members in self.groups if len(members) > 1]


def _coalesce(g: TaskGraph, assignment: Sequence[int], fpga_ids) -> ExecutionGraph:
    n = g.num_nodes
    nxt = [-1] * n
    has_prev = [False] * n
    for v in range(n):
        unit = assignment[v]
        if unit not in fpga_ids:
            continue
        succ = g.successors(v)
        if len(succ) == 1:
            w = succ[0]
            if assignment[w] == unit and g.in_degree(w) == 1:
                nxt[v] = w
                has_prev[w] = True

    groups: List[List[int]] = []
    group_of = [-1] * n
    for v in range(n):
        if group_of[v] != -1 or has_prev[v]:
            continue
        members = [v]
        w = nxt[v]
        while w != -1:
            members.append(w)
            w = nxt[w]
        for u in members:
            group_of[u] = len(groups)
        groups.append(members)
    return ExecutionGraph(groups=groups, group_of=group_of)


def coalesce_streams(g: TaskGraph, m: Mapping, platform: Platform) -> ExecutionGraph:
    """
    Collapse maximal chains u1 -> ... -> uk (k >= 2) mapped to the same FPGA, where every
    link u_i -> u_i+1 is u_i's only out-edge and u_i+1's only in-edge, into composites.
    """
    fpga_ids = {u.id for u in platform.fpga_units()}
    return _coalesce(g, m.assignment, fpga_ids)


class MakespanEvaluator:
    """
    Simulator bound to one graph and platform.

    Compute and transfer costs are tabulated once, so evaluating a candidate mapping
    costs time linear in the number of edges. `calls` counts cost() invocations.
    """

    def __init__(self, g: TaskGraph, platform: Platform, cfg: Optional[EvalConfig] = None):
        self.g = g
        self.platform = platform
        self.cfg = cfg or EvalConfig()
        self.calls = 0

        units = platform.units
        self.unit_index = {u.id: i for i, u in enumerate(units)}
        self.unit_ids = frozenset(self.unit_index)
        self.fpga_ids = {u.id for u in units if u.is_fpga}
        self.startup = [u.stream_startup for u in units]
        self.capacity = {u.id: u.area_capacity for u in units if u.is_fpga}
        self.area = [a.area for a in g.attributes]

        table = np.zeros((g.num_nodes, len(units)))
        for v in g.nodes:
            input_bytes = g.input_bytes(v, self.cfg.source_input_bytes)
            for j, u in enumerate(units):
                table[v, j] = compute_time(g.attributes[v], input_bytes, u)
        self.compute_table = table
        self._compute = table.tolist()

        inverse = np.zeros((len(units), len(units)))
        for i, a in enumerate(units):
            for j, b in enumerate(units):
                if i != j:
                    inverse[i, j] = transfer_time(1.0, a, b, platform)
        self._inverse_bw = inverse.tolist()
        self._in_edges = [[(q, g.edge_bytes(q, v)) for q in g.predecessors(v)] for v in g.nodes]

        self.bfs = bfs_order(g)
        self._random_orders: List[List[int]] = []

    def random_orders(self, count: int) -> List[List[int]]:
        """The first `count` seeded random schedules; generated once and cached"""
        for k in range(len(self._random_orders), count):
            self._random_orders.append(random_topological_order(self.g, self.cfg.seed * SCHEDULE_SEED_STRIDE + k))
        return self._random_orders[:count]

    def feasible(self, assignment: Sequence[int]) -> bool:
        """Known units only and no FPGA over its area capacity"""
        if not self.unit_ids.issuperset(assignment):
            return False
        if not self.capacity:
            return True
        usage = dict.fromkeys(self.capacity, 0.0)
        for v, unit in enumerate(assignment):
            if unit in usage:
                usage[unit] += self.area[v]
        return all(usage[u] <= self.capacity[u] + 1e-9 for u in usage)

    def check_shape(self, m: Mapping):
        if len(m) != self.g.num_nodes:
            raise InfeasibleMappingError(f"Mapping covers {len(m)} tasks, graph has {self.g.num_nodes}")
        unknown = sorted(set(m.assignment) - self.unit_ids)
        if unknown:
            raise InfeasibleMappingError(f"Mapping uses unknown units {unknown}")

    def check_mapping(self, m: Mapping):
        self.check_shape(m)
        if not self.feasible(m.assignment):
            raise InfeasibleMappingError("Mapping exceeds the area capacity of an FPGA")

    def _run(self, assignment: Sequence[int], order: Sequence[int], keep_times: bool):
        n = self.g.num_nodes
        if self.cfg.coalesce and self.fpga_ids:
            execution = _coalesce(self.g, assignment, self.fpga_ids)
        else:
            execution = ExecutionGraph(groups=[[v] for v in range(n)], group_of=list(range(n)))
        groups, group_of = execution.groups, execution.group_of
        compute, inverse_bw, in_edges = self._compute, self._inverse_bw, self._in_edges
        unit_index = self.unit_index

        unit_free = [0.0] * len(self.platform.units)
        start = [0.0] * n
        finish = [0.0] * n
        done = [False] * len(groups)
        makespan = 0.0
        for v in order:
            gi = group_of[v]
            if done[gi]:
                continue
            done[gi] = True
            members = groups[gi]
            ui = unit_index[assignment[v]]
            ready = unit_free[ui]
            for member in members:
                for q, size in in_edges[member]:
                    if group_of[q] == gi:
                        continue
                    arrival = finish[q] + size * inverse_bw[unit_index[assignment[q]]][ui]
                    if arrival > ready:
                        ready = arrival
            if len(members) == 1:
                duration = compute[v][ui]
            else:
                duration = max(compute[w][ui] for w in members) + self.startup[ui] * (len(members) - 1)
            end = ready + duration
            unit_free[ui] = end
            for member in members:
                start[member] = ready
                finish[member] = end
            if end > makespan:
                makespan = end
        if keep_times:
            return makespan, start, finish, groups
        return makespan

    def makespan(self, assignment: Sequence[int], order: Sequence[int]) -> float:
        """Unchecked fast path: makespan of a feasible assignment under a valid order"""
        return self._run(assignment, order, keep_times=False)

    def simulate(self, m: Mapping, order: Sequence[int], schedule_used: str = "custom") -> EvalResult:
        self.check_mapping(m)
        if not is_topological(self.g, order):
            raise ScheduleOrderError("Schedule order is not a topological order of the graph")
        makespan, start, finish, groups = self._run(m.assignment, order, keep_times=True)
        return EvalResult(
            makespan=makespan,
            start=tuple(start),
            finish=tuple(finish),
            units=m.assignment,
            schedule_used=schedule_used,
            groups=tuple(tuple(members) for members in groups if len(members) > 1),
        )

    def cost(self, m: Mapping) -> float:
        """Internal deterministic cost used by the search engines; inf when infeasible"""
        self.calls += 1
        if not self.feasible(m.assignment):
            return math.inf
        best = self._run(m.assignment, self.bfs, keep_times=False)
        for order in self.random_orders(self.cfg.internal_schedules - 1):
            best = min(best, self._run(m.assignment, order, keep_times=False))
        return best

    def evaluate(self, m: Mapping) -> float:
        """
        Reporting makespan: minimum over the BFS and cfg.random_schedules random orders.

        Area-infeasible mappings score inf; a mapping of the wrong length or naming a unit
        the platform lacks raises InfeasibleMappingError.
        """
        self.check_shape(m)
        if not self.feasible(m.assignment):
            return math.inf
        best = self._run(m.assignment, self.bfs, keep_times=False)
        for order in self.random_orders(self.cfg.random_schedules):
            best = min(best, self._run(m.assignment, order, keep_times=False))
        return best

    def best_result(self, m: Mapping) -> EvalResult:
        """Full timeline of the schedule that attains evaluate()"""
        best = self.simulate(m, self.bfs, "bfs")
        for k, order in enumerate(self.random_orders(self.cfg.random_schedules)):
            makespan = self._run(m.assignment, order, keep_times=False)
            if makespan < best.makespan:
                best = self.simulate(m, order, f"random-{k}")
        return best

    def default_mapping(self) -> Mapping:
        return Mapping.uniform(self.g.num_nodes, self.platform.default_unit)


def simulate(g: TaskGraph, p: Platform, m: Mapping, order: Sequence[int],
             cfg: Optional[EvalConfig] = None) -> EvalResult:
    """
    List-simulate mapping m under the given schedule order.

    Raises:
        InfeasibleMappingError: FPGA area exceeded or unknown unit
        ScheduleOrderError: order is not topological
    """
    return MakespanEvaluator(g, p, cfg).simulate(m, order)


def evaluate(g: TaskGraph, p: Platform, m: Mapping, cfg: Optional[EvalConfig] = None) -> float:
    """Minimum makespan over the BFS schedule and cfg.random_schedules seeded random schedules"""
    return MakespanEvaluator(g, p, cfg).evaluate(m)


def relative_improvement(baseline: float, candidate: float) -> float:
    """Positive relative improvement; deteriorations count as zero"""
    if not baseline > 0:
        raise ValueError(f"Baseline makespan must be positive, got {baseline}")
    return max(0.0, (baseline - candidate) / baseline)


def check_schedule(g: TaskGraph, p: Platform, timeline: Sequence[ScheduledTask],
                   groups: Sequence[Sequence[int]] = ()) -> List[str]:
    """
    Precedence and unit-exclusivity violations of a timeline.

    Tasks listed together in `groups` are streaming composites: their internal edges are
    exempt from precedence and they occupy their unit as one interval.
    """
    tolerance = 1e-9
    by_task = {entry.task: entry for entry in timeline}
    composite = {}
    for gi, members in enumerate(groups):
        for v in members:
            composite[v] = gi

    violations = []
    for e in g.edges:
        a, b = by_task.get(e.src), by_task.get(e.dst)
        if a is None or b is None:
            violations.append(f"edge {e.src}->{e.dst} has an unscheduled endpoint")
            continue
        if e.src in composite and composite.get(e.dst) == composite[e.src]:
            continue
        arrival = a.finish + transfer_time(e.data_size, p.unit(a.unit), p.unit(b.unit), p)
        if b.start + tolerance < arrival:
            violations.append(f"task {e.dst} starts at {b.start:.6g} before data from {e.src} "
                              f"arrives at {arrival:.6g}")

    intervals: Dict[int, List[Tuple[float, float, Any]]] = {}
    seen = set()
    for entry in timeline:
        key = ("group", composite[entry.task]) if entry.task in composite else ("task", entry.task)
        if key in seen:
            continue
        seen.add(key)
        if entry.finish + tolerance < entry.start:
            violations.append(f"task {entry.task} finishes before it starts")
        intervals.setdefault(entry.unit, []).append((entry.start, entry.finish, key))
    for unit, spans in intervals.items():
        spans.sort(key=lambda s: (s[0], s[1]))
        for (s1, f1, k1), (s2, f2, k2) in zip(spans, spans[1:]):
            if s2 + tolerance < f1 and f2 > s2 and f1 > s1:
                violations.append(f"unit {unit} runs {k1} and {k2} concurrently")
    return violations


def result_to_dict(result: EvalResult) -> Dict[str, Any]:
    return {
        "makespan": result.makespan,
        "schedule_used": result.schedule_used,
        "timeline": [
            {"task": t.task, "unit": t.unit, "start": t.start, "finish": t.finish}
            for t in result.timeline()
        ],
        "composites": [list(members) for members in result.groups],
    }


def result_to_frame(result: EvalResult) -> pd.DataFrame:
    rows = [(t.task, t.unit, t.start, t.finish) for t in result.timeline()]
    return pd.DataFrame(rows, columns=["task", "unit", "start", "finish"])


def result_to_csv(result: EvalResult) -> str:
    buffer = io.StringIO()
    result_to_frame(result).to_csv(buffer, index=False)
    return buffer.getvalue()


def result_to_json(result: EvalResult) -> str:
    return json.dumps(result_to_dict(result), indent=2) + "\n"
