from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
import pytest

from conftest import small_instance
from services.evaluator import Mapping, check_schedule
from services.list_scheduling import heft, optimistic_cost_table, peft, schedule_length, upward_rank
from services.platform import (
    Platform,
    ProcessingUnit,
    TaskAttributes,
    UnitKind,
    area_feasible,
    compute_time,
    transfer_time,
    uniform_bandwidth,
)
from services.taskgraph import TaskGraph

SOURCE_BYTES = 1e8


def _compute(g, p, v, unit):
    return compute_time(g.attributes[v], g.input_bytes(v, SOURCE_BYTES), unit)


def test_single_task_goes_to_the_fastest_unit(three_speed_platform):
    g = TaskGraph(num_nodes=1, attributes=(TaskAttributes(complexity=1.0),))
    for scheduler in (heft, peft):
        mapping, schedule = scheduler(g, three_speed_platform, 1e9)
        assert mapping == Mapping((1,))
        assert schedule_length(schedule) == pytest.approx(0.5)


def test_sink_rows_of_the_optimistic_cost_table_are_zero(fig1, default_platform):
    table = optimistic_cost_table(fig1, default_platform, SOURCE_BYTES)
    assert table.shape == (6, 3)
    assert np.all(table[5] == 0.0)


def test_optimistic_cost_table_matches_the_recursive_definition(default_platform):
    g = small_instance(3)
    assert g.num_nodes == 6
    units = default_platform.units

    @lru_cache(maxsize=None)
    def oct_value(v, i):
        best = 0.0
        for w in g.successors(v):
            options = [
                oct_value(w, j) + _compute(g, default_platform, w, b)
                + transfer_time(g.edge_bytes(v, w), units[i], b, default_platform)
                for j, b in enumerate(units)
            ]
            best = max(best, min(options))
        return best

    table = optimistic_cost_table(g, default_platform, SOURCE_BYTES)
    for v, i in itertools.product(g.nodes, range(len(units))):
        assert table[v, i] == pytest.approx(oct_value(v, i))


def test_upward_rank_matches_the_recursive_definition(default_platform):
    g = small_instance(9)
    units = default_platform.units
    pairs = [(a, b) for a in units for b in units if a.id != b.id]
    mean_inverse = sum(1.0 / default_platform.bandwidth[(a.id, b.id)] for a, b in pairs) / len(pairs)

    @lru_cache(maxsize=None)
    def rank(v):
        mean_compute = sum(_compute(g, default_platform, v, u) for u in units) / len(units)
        return mean_compute + max((g.edge_bytes(v, w) * mean_inverse + rank(w) for w in g.successors(v)), default=0.0)

    assert upward_rank(g, default_platform, SOURCE_BYTES) == pytest.approx([rank(v) for v in g.nodes])


def test_entry_task_has_the_highest_rank(fig1, default_platform):
    rank = upward_rank(fig1, default_platform, SOURCE_BYTES)
    assert max(range(6), key=rank.__getitem__) == 0


@pytest.mark.parametrize("scheduler", [heft, peft])
def test_schedules_respect_precedence_and_units(scheduler, small_corpus, default_platform):
    for g in small_corpus[:40]:
        mapping, schedule = scheduler(g, default_platform, SOURCE_BYTES)
        assert [t.unit for t in sorted(schedule, key=lambda t: t.task)] == list(mapping.assignment)
        assert check_schedule(g, default_platform, schedule) == []
        assert [(t.start, t.task) for t in schedule] == sorted((t.start, t.task) for t in schedule)


@pytest.mark.parametrize("scheduler", [heft, peft])
def test_small_fpga_is_never_overfilled(scheduler, small_corpus):
    units = (
        ProcessingUnit(0, UnitKind.CPU, cores=1, per_core_rate=1e8),
        ProcessingUnit(1, UnitKind.FPGA, per_core_rate=1e10, area_capacity=40.0),
    )
    tight = Platform(units=units, default_unit=0, bandwidth=uniform_bandwidth([0, 1], 1e10))
    used_fpga = False
    for g in small_corpus[:40]:
        mapping, _ = scheduler(g, tight, SOURCE_BYTES)
        assert area_feasible(mapping, g, tight)
        used_fpga = used_fpga or 1 in mapping.assignment
    assert used_fpga


def test_schedulers_are_deterministic(fig2, default_platform):
    assert heft(fig2, default_platform) == heft(fig2, default_platform)
    assert peft(fig2, default_platform) == peft(fig2, default_platform)


@pytest.mark.parametrize("scheduler", [heft, peft])
def test_equal_independent_tasks_spread_over_identical_units(scheduler):
    units = (
        ProcessingUnit(0, UnitKind.CPU, cores=1, per_core_rate=1e9),
        ProcessingUnit(1, UnitKind.CPU, cores=1, per_core_rate=1e9),
    )
    twin = Platform(units=units, default_unit=0, bandwidth=uniform_bandwidth([0, 1], 1e9))
    g = TaskGraph(num_nodes=2, attributes=(TaskAttributes(complexity=1.0),) * 2)
    mapping, schedule = scheduler(g, twin, 1e9)
    assert sorted(mapping.assignment) == [0, 1]
    assert schedule_length(schedule) == pytest.approx(1.0)


def _insertion_eft(g, p, source_bytes):
    """Plain re-derivation of HEFT: scan ready tasks by rank, try every gap on every unit"""
    rank = upward_rank(g, p, source_bytes)
    busy = {u.id: [] for u in p.units}
    area_left = {u.id: u.area_capacity for u in p.units if u.is_fpga}
    unit_of, start, finish = {}, {}, {}
    pending = set(g.nodes)
    while pending:
        ready = [v for v in pending if all(q in unit_of for q in g.predecessors(v))]
        v = min(ready, key=lambda t: (-rank[t], t))
        best = None
        for u in p.units:
            if u.id in area_left and g.attributes[v].area > area_left[u.id] + 1e-9:
                continue
            ready_at = 0.0
            for q in g.predecessors(v):
                inverse = 0.0 if unit_of[q] == u.id else 1.0 / p.bandwidth[(unit_of[q], u.id)]
                ready_at = max(ready_at, finish[q] + g.edge_bytes(q, v) * inverse)
            duration = _compute(g, p, v, u)
            gaps = sorted({ready_at} | {b for _, b in busy[u.id] if b >= ready_at})
            s = next(c for c in gaps if duration == 0 or all(c + duration <= a or b <= c for a, b in busy[u.id]))
            if best is None or s + duration < best[0]:
                best = (s + duration, u.id, s)
        end, unit, s = best
        unit_of[v], start[v], finish[v] = unit, s, end
        if end > s:
            busy[unit].append((s, end))
        if unit in area_left:
            area_left[unit] -= g.attributes[v].area
        pending.remove(v)
    return unit_of, start, finish


def test_heft_matches_an_exhaustive_insertion_search(small_corpus, default_platform):
    for g in small_corpus[:30]:
        mapping, schedule = heft(g, default_platform, SOURCE_BYTES)
        unit_of, start, finish = _insertion_eft(g, default_platform, SOURCE_BYTES)
        assert mapping.assignment == tuple(unit_of[v] for v in g.nodes)
        for t in schedule:
            assert t.start == pytest.approx(start[t.task])
            assert t.finish == pytest.approx(finish[t.task])
