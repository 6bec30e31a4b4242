from __future__ import annotations

import numpy as np
import pytest

from services.evaluator import EvalConfig, Mapping
from services.genetic import GAConfig, GeneticMapper, nsga2_map
from services.mappers import MapperConfig, brute_force_map
from services.platform import Platform, ProcessingUnit, TaskAttributes, UnitKind, uniform_bandwidth
from services.taskgraph import TaskGraph

FAST_EVAL = EvalConfig(random_schedules=0)


def test_invalid_configs_are_rejected():
    with pytest.raises(ValueError):
        GAConfig(population=1)
    with pytest.raises(ValueError):
        GAConfig(crossover_rate=1.5)
    with pytest.raises(ValueError):
        GAConfig(mutation_rate=-0.1)
    with pytest.raises(ValueError):
        GAConfig(stall_generations=0)


def test_single_task_finds_the_fastest_unit(three_speed_platform):
    g = TaskGraph(num_nodes=1, attributes=(TaskAttributes(complexity=1.0),))
    optimizer = GeneticMapper(g, three_speed_platform, GAConfig(population=10, generations=1), FAST_EVAL)
    assert optimizer.run() == Mapping((1,))
    assert optimizer.history[-1] == pytest.approx(0.05)


def test_history_is_monotone_and_counts_generation_zero(fig2, default_platform):
    optimizer = GeneticMapper(fig2, default_platform, GAConfig(population=20, generations=15, seed=2), FAST_EVAL)
    optimizer.run()
    assert len(optimizer.history) == 16
    assert all(b <= a for a, b in zip(optimizer.history, optimizer.history[1:]))
    assert optimizer.history[-1] == optimizer.best_fitness


def test_never_worse_than_the_default_mapping(small_corpus, default_platform):
    for seed, g in enumerate(small_corpus[:10]):
        optimizer = GeneticMapper(g, default_platform, GAConfig(population=10, generations=3, seed=seed), FAST_EVAL)
        optimizer.run()
        assert optimizer.best_fitness <= optimizer.evaluator.cost(Mapping.uniform(g.num_nodes, 0))


def test_runs_are_deterministic_per_seed(fig2, default_platform):
    ga = GAConfig(population=16, generations=10, seed=7)
    assert nsga2_map(fig2, default_platform, ga, FAST_EVAL) == nsga2_map(fig2, default_platform, ga, FAST_EVAL)


def test_stall_stops_early(fig1, default_platform):
    idle = fig1.with_attributes([TaskAttributes(complexity=0.0)] * 6)
    optimizer = GeneticMapper(idle, default_platform, GAConfig(population=8, generations=50, stall_generations=3),
                              FAST_EVAL)
    optimizer.run()
    assert len(optimizer.history) == 4


def test_repair_moves_the_largest_tasks_back_to_the_cpu():
    units = (
        ProcessingUnit(0, UnitKind.CPU),
        ProcessingUnit(1, UnitKind.FPGA, area_capacity=25.0),
    )
    p = Platform(units=units, default_unit=0, bandwidth=uniform_bandwidth([0, 1], 1e9))
    areas = [10.0, 20.0, 5.0, 20.0]
    g = TaskGraph.from_edges(4, [(0, 1, 1.0), (0, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)],
                             attributes=[TaskAttributes(complexity=1.0, area=a) for a in areas])
    optimizer = GeneticMapper(g, p, GAConfig(population=4, generations=0), FAST_EVAL)
    # genes follow the breadth-first order 0, 1, 2, 3
    repaired = optimizer.repair(np.ones(4, dtype=int))
    assert repaired.tolist() == [1, 0, 1, 0]


@pytest.mark.slow
def test_reaches_the_exhaustive_optimum(small_corpus, default_platform):
    optimal = 0
    instances = small_corpus
    for seed, g in enumerate(instances):
        _, optimum = brute_force_map(g, default_platform, MapperConfig(eval=FAST_EVAL))
        optimizer = GeneticMapper(g, default_platform, GAConfig(population=100, generations=200, seed=seed), FAST_EVAL)
        optimizer.run()
        if optimizer.best_fitness <= optimum + 1e-12:
            optimal += 1
    assert optimal >= 0.95 * len(instances)
