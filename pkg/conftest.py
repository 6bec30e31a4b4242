import os

import pytest

import config
from services.generators import GenConfig, generate
from services.platform import Platform, ProcessingUnit, UnitKind, load_platform, uniform_bandwidth
from services.taskgraph import load_graph

GRAPH_DIR = os.path.join(config.BASE_DIR, "data", "graphs")


@pytest.fixture
def fig1():
    return load_graph(os.path.join(GRAPH_DIR, "fig1.json"))


@pytest.fixture
def fig2():
    return load_graph(os.path.join(GRAPH_DIR, "fig2.json"))


@pytest.fixture(scope="session")
def default_platform():
    return load_platform(config.DEFAULT_PLATFORM_FILE)


@pytest.fixture
def cpu_fpga_platform():
    """One single-core CPU and one FPGA, 1 GB/s both ways, 0.5 s stream startup"""
    units = (
        ProcessingUnit(0, UnitKind.CPU, cores=1, per_core_rate=1e9),
        ProcessingUnit(1, UnitKind.FPGA, per_core_rate=1e9, area_capacity=100.0, stream_startup=0.5),
    )
    return Platform(units=units, default_unit=0, bandwidth=uniform_bandwidth([0, 1], 1e9))


@pytest.fixture
def three_speed_platform():
    """Units where a unit-work task takes 1.0 s, 0.5 s and 2.0 s respectively"""
    units = (
        ProcessingUnit(0, UnitKind.CPU, cores=1, per_core_rate=1e9),
        ProcessingUnit(1, UnitKind.GPU, cores=1, per_core_rate=2e9),
        ProcessingUnit(2, UnitKind.FPGA, per_core_rate=5e8, area_capacity=1000.0),
    )
    return Platform(units=units, default_unit=0, bandwidth=uniform_bandwidth([0, 1, 2], 1e9))


def small_instance(seed: int):
    """Seeded instance with 3..8 tasks and sampled attributes"""
    return generate(GenConfig(n_tasks=3 + seed % 6, seed=seed))


@pytest.fixture(scope="session")
def small_corpus():
    return [small_instance(seed) for seed in range(100)]
