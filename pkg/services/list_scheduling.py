"""
List Scheduling Baselines
This module implements the two classic list-scheduling reference mappers:

1. HEFT - upward-rank priorities from unit-averaged costs, insertion-based earliest finish time
2. PEFT - optimistic cost table (OCT) priorities, unit choice by EFT + OCT

Both use the shared surrogate cost model and skip FPGAs whose remaining area cannot
hold a task, so the returned mapping is always feasible.
"""
import bisect
import heapq
import logging
from typing import List, Sequence, Tuple

import numpy as np

import config
from services.evaluator import Mapping, ScheduledTask
from services.platform import Platform, compute_time
from services.taskgraph import TaskGraph, bfs_order

logger = logging.getLogger(__name__)


def compute_table(g: TaskGraph, p: Platform, source_bytes: float = config.DEFAULT_EDGE_BYTES) -> np.ndarray:
    """Execution time of every task (rows) on every unit (columns, platform order)"""
    table = np.zeros((g.num_nodes, len(p.units)))
    for v in g.nodes:
        input_bytes = g.input_bytes(v, source_bytes)
        for j, u in enumerate(p.units):
            table[v, j] = compute_time(g.attributes[v], input_bytes, u)
    return table


def inverse_bandwidth(p: Platform) -> np.ndarray:
    """Seconds per byte between unit indices; zero on the diagonal"""
    k = len(p.units)
    inverse = np.zeros((k, k))
    for i, a in enumerate(p.units):
        for j, b in enumerate(p.units):
            if i != j:
                inverse[i, j] = 1.0 / p.bandwidth[(a.id, b.id)]
    return inverse


def upward_rank(g: TaskGraph, p: Platform, source_bytes: float = config.DEFAULT_EDGE_BYTES) -> List[float]:
    """
    rank(v) = mean compute(v) + max over successors w of (mean transfer(v, w) + rank(w)).

    Transfers are averaged over distinct ordered unit pairs.
    """
    mean_compute = compute_table(g, p, source_bytes).mean(axis=1)
    k = len(p.units)
    inverse = inverse_bandwidth(p)
    mean_inverse = inverse.sum() / (k * (k - 1)) if k > 1 else 0.0
    rank = [0.0] * g.num_nodes
    for v in reversed(bfs_order(g)):
        tail = 0.0
        for w in g.successors(v):
            tail = max(tail, g.edge_bytes(v, w) * mean_inverse + rank[w])
        rank[v] = float(mean_compute[v]) + tail
    return rank


def optimistic_cost_table(g: TaskGraph, p: Platform,
                          source_bytes: float = config.DEFAULT_EDGE_BYTES) -> np.ndarray:
    """
    OCT(t, u) = max over successors w of min over units u' of
    (OCT(w, u') + compute(w, u') + transfer(t->w, u, u')); zero for sinks.
    """
    table = compute_table(g, p, source_bytes)
    inverse = inverse_bandwidth(p)
    oct_table = np.zeros((g.num_nodes, len(p.units)))
    for v in reversed(bfs_order(g)):
        for w in g.successors(v):
            # rows: unit of v, columns: unit of w
            options = oct_table[w] + table[w] + g.edge_bytes(v, w) * inverse
            oct_table[v] = np.maximum(oct_table[v], options.min(axis=1))
    return oct_table


class _InsertionSchedule:
    """Per-unit busy intervals with insertion-based earliest start"""

    def __init__(self, g: TaskGraph, p: Platform, source_bytes: float):
        self.g = g
        self.platform = p
        self.table = compute_table(g, p, source_bytes)
        self.inverse = inverse_bandwidth(p)
        self.busy: List[List[Tuple[float, float]]] = [[] for _ in p.units]
        self.unit_of = [-1] * g.num_nodes
        self.start = [0.0] * g.num_nodes
        self.finish = [0.0] * g.num_nodes
        self.area_left = {i: u.area_capacity for i, u in enumerate(p.units) if u.is_fpga}

    def fits(self, v: int, ui: int) -> bool:
        if ui not in self.area_left:
            return True
        return self.g.attributes[v].area <= self.area_left[ui] + 1e-9

    def earliest_finish(self, v: int, ui: int) -> Tuple[float, float]:
        ready = 0.0
        for q in self.g.predecessors(v):
            arrival = self.finish[q] + self.g.edge_bytes(q, v) * self.inverse[self.unit_of[q], ui]
            ready = max(ready, arrival)
        duration = float(self.table[v, ui])
        start = ready
        if duration > 0:
            for busy_start, busy_finish in self.busy[ui]:
                if busy_finish <= start:
                    continue
                if start + duration <= busy_start:
                    break
                start = max(start, busy_finish)
        return start, start + duration

    def place(self, v: int, ui: int, start: float, finish: float):
        self.unit_of[v] = ui
        self.start[v] = start
        self.finish[v] = finish
        if finish > start:
            bisect.insort(self.busy[ui], (start, finish))
        if ui in self.area_left:
            self.area_left[ui] -= self.g.attributes[v].area

    def result(self) -> Tuple[Mapping, List[ScheduledTask]]:
        ids = self.platform.unit_ids
        mapping = Mapping(tuple(ids[ui] for ui in self.unit_of))
        schedule = [ScheduledTask(v, ids[self.unit_of[v]], self.start[v], self.finish[v]) for v in self.g.nodes]
        schedule.sort(key=lambda t: (t.start, t.task))
        return mapping, schedule


def _list_schedule(g: TaskGraph, p: Platform, priority: Sequence[float], bias: np.ndarray,
                   source_bytes: float) -> Tuple[Mapping, List[ScheduledTask]]:
    """
    Take ready tasks by highest priority (ties: lower id) and place each on the feasible unit
    minimizing finish + bias[v, unit] (ties: first unit in platform order).
    """
    schedule = _InsertionSchedule(g, p, source_bytes)
    waiting = [g.in_degree(v) for v in g.nodes]
    ready = [(-priority[v], v) for v in g.nodes if waiting[v] == 0]
    heapq.heapify(ready)
    while ready:
        _, v = heapq.heappop(ready)
        best = None
        for ui in range(len(p.units)):
            if not schedule.fits(v, ui):
                continue
            start, finish = schedule.earliest_finish(v, ui)
            score = finish + bias[v, ui]
            if best is None or score < best[0]:
                best = (score, ui, start, finish)
        _, ui, start, finish = best
        schedule.place(v, ui, start, finish)
        for w in g.successors(v):
            waiting[w] -= 1
            if waiting[w] == 0:
                heapq.heappush(ready, (-priority[w], w))
    return schedule.result()


def heft(g: TaskGraph, p: Platform,
         source_bytes: float = config.DEFAULT_EDGE_BYTES) -> Tuple[Mapping, List[ScheduledTask]]:
    """
    Heterogeneous Earliest Finish Time.

    Returns:
        (mapping, schedule) where the schedule is the insertion-based timeline HEFT built
    """
    rank = upward_rank(g, p, source_bytes)
    mapping, schedule = _list_schedule(g, p, rank, np.zeros((g.num_nodes, len(p.units))), source_bytes)
    logger.debug(f"HEFT placed {g.num_nodes} tasks, schedule length {schedule_length(schedule):.6g}")
    return mapping, schedule


def peft(g: TaskGraph, p: Platform,
         source_bytes: float = config.DEFAULT_EDGE_BYTES) -> Tuple[Mapping, List[ScheduledTask]]:
    """Predict Earliest Finish Time: rank is the unit-averaged OCT, placement minimizes EFT + OCT"""
    oct_table = optimistic_cost_table(g, p, source_bytes)
    rank = oct_table.mean(axis=1).tolist()
    mapping, schedule = _list_schedule(g, p, rank, oct_table, source_bytes)
    logger.debug(f"PEFT placed {g.num_nodes} tasks, schedule length {schedule_length(schedule):.6g}")
    return mapping, schedule


def schedule_length(schedule: Sequence[ScheduledTask]) -> float:
    return max((t.finish for t in schedule), default=0.0)

