from __future__ import annotations

import pytest

from services.evaluator import Mapping
from services.platform import (
    Platform,
    PlatformError,
    ProcessingUnit,
    TaskAttributes,
    UnitKind,
    area_feasible,
    compute_time,
    fpga_area_usage,
    platform_from_dict,
    platform_to_dict,
    transfer_time,
    uniform_bandwidth,
)


def test_cpu_time_follows_amdahl():
    cpu = ProcessingUnit(0, UnitKind.CPU, cores=4, per_core_rate=1e9)
    attrs = TaskAttributes(complexity=2.0, parallelizability=0.5)
    assert compute_time(attrs, 1e9, cpu) == pytest.approx(2.0 * (0.5 + 0.5 / 4))


def test_fully_parallel_task_scales_with_cores():
    gpu = ProcessingUnit(1, UnitKind.GPU, cores=1000, per_core_rate=1e8)
    attrs = TaskAttributes(complexity=1.0, parallelizability=1.0)
    assert compute_time(attrs, 1e9, gpu) == pytest.approx(1e9 / 1e8 / 1000)


def test_fpga_time_scales_with_streamability():
    fpga = ProcessingUnit(2, UnitKind.FPGA, per_core_rate=5e8, area_capacity=10)
    attrs = TaskAttributes(complexity=1.0, streamability=4.0)
    assert compute_time(attrs, 1e9, fpga) == pytest.approx(0.5)


def test_zero_work_takes_no_time():
    cpu = ProcessingUnit(0, UnitKind.CPU)
    assert compute_time(TaskAttributes(complexity=0.0), 1e9, cpu) == 0.0
    assert compute_time(TaskAttributes(complexity=3.0), 0.0, cpu) == 0.0


def test_transfer_time(default_platform):
    cpu, gpu, fpga = default_platform.units
    assert transfer_time(1e9, cpu, cpu, default_platform) == 0.0
    assert transfer_time(1.2e10, cpu, gpu, default_platform) == pytest.approx(1.0)
    assert transfer_time(8e8, fpga, cpu, default_platform) == pytest.approx(1.0)


def test_default_platform_shape(default_platform):
    assert default_platform.unit_ids == [0, 1, 2]
    assert default_platform.default_unit == 0
    assert [u.kind for u in default_platform.units] == [UnitKind.CPU, UnitKind.GPU, UnitKind.FPGA]
    assert [u.id for u in default_platform.fpga_units()] == [2]


def test_missing_bandwidth_entry_is_rejected():
    units = (ProcessingUnit(0, UnitKind.CPU), ProcessingUnit(1, UnitKind.GPU))
    with pytest.raises(PlatformError):
        Platform(units=units, default_unit=0, bandwidth={(0, 1): 1e9})


def test_default_unit_must_be_cpu():
    units = (ProcessingUnit(0, UnitKind.CPU), ProcessingUnit(1, UnitKind.GPU))
    with pytest.raises(PlatformError):
        Platform(units=units, default_unit=1, bandwidth=uniform_bandwidth([0, 1], 1e9))


def test_invalid_unit_is_rejected():
    with pytest.raises(PlatformError):
        ProcessingUnit(0, UnitKind.CPU, cores=0)
    with pytest.raises(ValueError):
        ProcessingUnit(0, "TPU")


def test_platform_json_roundtrip(default_platform):
    again = platform_from_dict(platform_to_dict(default_platform))
    assert again == default_platform
    assert again.bandwidth == default_platform.bandwidth


def test_platform_json_rejects_unknown_fields(default_platform):
    doc = platform_to_dict(default_platform)
    doc["units"][0]["voltage"] = 1.2
    with pytest.raises(PlatformError):
        platform_from_dict(doc)


def test_area_feasibility(fig1, default_platform):
    # fig1 areas: 32, 24, 36, 20, 28, 16 against a capacity of 218
    all_fpga = Mapping.uniform(6, 2)
    assert fpga_area_usage(all_fpga.assignment, fig1, default_platform) == {2: 156.0}
    assert area_feasible(all_fpga, fig1, default_platform)

    tight = Platform(
        units=(ProcessingUnit(0, UnitKind.CPU), ProcessingUnit(2, UnitKind.FPGA, area_capacity=50)),
        default_unit=0,
        bandwidth=uniform_bandwidth([0, 2], 1e9),
    )
    assert area_feasible(Mapping((2, 0, 0, 0, 0, 2)), fig1, tight)
    assert not area_feasible(Mapping((2, 2, 0, 0, 0, 0)), fig1, tight)
