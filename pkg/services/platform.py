"""
Platform Model
This module describes heterogeneous platforms (CPU, GPU and FPGA processing units with
their interconnect bandwidths) and the surrogate per-task cost model:

- CPU/GPU: Amdahl's law over the unit's cores
- FPGA: throughput scaled by the task's streamability, limited by area
- transfers: bytes divided by the ordered-pair bandwidth, free on the same unit

All mappers and the evaluator share this model, so algorithms are compared on one metric.
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Dict, List, Sequence, Tuple

import config

if TYPE_CHECKING:
    from services.taskgraph import TaskGraph

logger = logging.getLogger(__name__)

UNIT_FIELDS = {"id", "kind", "cores", "per_core_rate", "area_capacity", "stream_startup"}
PLATFORM_FIELDS = {"units", "default_unit", "bandwidth"}
BANDWIDTH_FIELDS = {"from", "to", "bytes_per_sec"}


class PlatformError(ValueError):
    """Invalid platform description"""


class UnitKind(str, Enum):
    CPU = "CPU"
    GPU = "GPU"
    FPGA = "FPGA"


@dataclass(frozen=True)
class TaskAttributes:
    """
    Performance attributes of one task.

    Args:
        complexity: Operations per byte of input
        parallelizability: Parallel fraction in [0, 1] (Amdahl)
        streamability: FPGA speedup factor, > 0
        area: FPGA area units occupied when mapped to an FPGA
    """
    complexity: float = 0.0
    parallelizability: float = 0.0
    streamability: float = 1.0
    area: float = 0.0

    def violations(self) -> List[str]:
        problems = []
        if not self.complexity >= 0:
            problems.append(f"complexity {self.complexity} < 0")
        if not 0.0 <= self.parallelizability <= 1.0:
            problems.append(f"parallelizability {self.parallelizability} outside [0, 1]")
        if not self.streamability > 0:
            problems.append(f"streamability {self.streamability} <= 0")
        if not self.area >= 0:
            problems.append(f"area {self.area} < 0")
        return problems

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class ProcessingUnit:
    id: int
    kind: UnitKind
    cores: int = 1
    per_core_rate: float = 1e9
    area_capacity: float = 0.0
    stream_startup: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", UnitKind(self.kind))
        if self.cores < 1:
            raise PlatformError(f"Unit {self.id}: cores must be >= 1")
        if not self.per_core_rate > 0:
            raise PlatformError(f"Unit {self.id}: per_core_rate must be > 0")
        if not self.area_capacity >= 0:
            raise PlatformError(f"Unit {self.id}: area_capacity must be >= 0")
        if not self.stream_startup >= 0:
            raise PlatformError(f"Unit {self.id}: stream_startup must be >= 0")

    @property
    def is_fpga(self) -> bool:
        return self.kind is UnitKind.FPGA


@dataclass(frozen=True)
class Platform:
    """
    A set of processing units, the default (CPU) unit and a bandwidth table
    keyed by ordered (from, to) unit-id pairs.
    """
    units: Tuple[ProcessingUnit, ...]
    default_unit: int
    bandwidth: Dict[Tuple[int, int], float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        ids = [u.id for u in self.units]
        if not ids:
            raise PlatformError("Platform has no processing units")
        if len(set(ids)) != len(ids):
            raise PlatformError(f"Duplicate unit ids in {ids}")
        if self.default_unit not in ids:
            raise PlatformError(f"Default unit {self.default_unit} is not a platform unit")
        if self.unit(self.default_unit).kind is not UnitKind.CPU:
            raise PlatformError(f"Default unit {self.default_unit} must be a CPU")
        for a in ids:
            for b in ids:
                if a == b:
                    continue
                rate = self.bandwidth.get((a, b))
                if rate is None:
                    raise PlatformError(f"Missing bandwidth entry {a}->{b}")
                if not rate > 0:
                    raise PlatformError(f"Bandwidth {a}->{b} must be > 0")

    @property
    def unit_ids(self) -> List[int]:
        return [u.id for u in self.units]

    def unit(self, unit_id: int) -> ProcessingUnit:
        for u in self.units:
            if u.id == unit_id:
                return u
        raise PlatformError(f"Unknown unit id {unit_id}")

    def index_of(self, unit_id: int) -> int:
        for i, u in enumerate(self.units):
            if u.id == unit_id:
                return i
        raise PlatformError(f"Unknown unit id {unit_id}")

    def fpga_units(self) -> List[ProcessingUnit]:
        return [u for u in self.units if u.is_fpga]


def compute_time(attrs: TaskAttributes, input_bytes: float, u: ProcessingUnit) -> float:
    """
    Seconds to execute a task on unit u.

    work = complexity * input_bytes. CPU/GPU follow Amdahl's law over the unit's cores;
    FPGAs run at per_core_rate scaled by the task's streamability.
    """
    work = attrs.complexity * input_bytes
    if work <= 0:
        return 0.0
    if u.kind is UnitKind.FPGA:
        return work / (u.per_core_rate * attrs.streamability)
    p = attrs.parallelizability
    return work / u.per_core_rate * ((1.0 - p) + p / u.cores)


def transfer_time(num_bytes: float, source: ProcessingUnit, target: ProcessingUnit,
                  platform: Platform) -> float:
    """Seconds to move num_bytes from source to target; zero on the same unit"""
    if source.id == target.id or num_bytes <= 0:
        return 0.0
    rate = platform.bandwidth.get((source.id, target.id))
    if rate is None:
        raise PlatformError(f"Missing bandwidth entry {source.id}->{target.id}")
    return num_bytes / rate


def fpga_area_usage(assignment: Sequence[int], g: "TaskGraph", platform: Platform) -> Dict[int, float]:
    """Summed task area per FPGA unit id"""
    usage = {u.id: 0.0 for u in platform.fpga_units()}
    for v, unit_id in enumerate(assignment):
        if unit_id in usage:
            usage[unit_id] += g.attributes[v].area
    return usage


def area_feasible(mapping, g: "TaskGraph", platform: Platform) -> bool:
    """True iff every FPGA holds at most its area capacity"""
    assignment = getattr(mapping, "assignment", mapping)
    usage = fpga_area_usage(assignment, g, platform)
    return all(usage[u.id] <= u.area_capacity + 1e-9 for u in platform.fpga_units())


def platform_from_dict(doc: Dict[str, Any]) -> Platform:
    if not isinstance(doc, dict):
        raise PlatformError("Platform document must be an object")
    unknown = set(doc) - PLATFORM_FIELDS
    if unknown:
        raise PlatformError(f"Unknown platform fields {sorted(unknown)}")
    missing = PLATFORM_FIELDS - set(doc)
    if missing:
        raise PlatformError(f"Platform document missing {sorted(missing)}")

    units = []
    for entry in doc["units"]:
        unknown = set(entry) - UNIT_FIELDS
        if unknown:
            raise PlatformError(f"Unknown unit fields {sorted(unknown)}")
        try:
            units.append(ProcessingUnit(
                id=int(entry["id"]),
                kind=UnitKind(entry["kind"]),
                cores=int(entry.get("cores", 1)),
                per_core_rate=float(entry["per_core_rate"]),
                area_capacity=float(entry.get("area_capacity", 0.0)),
                stream_startup=float(entry.get("stream_startup", 0.0)),
            ))
        except KeyError as e:
            raise PlatformError(f"Unit entry missing field {e}") from e
        except ValueError as e:
            raise PlatformError(f"Invalid unit entry {entry!r}: {e}") from e

    bandwidth = {}
    for entry in doc["bandwidth"]:
        unknown = set(entry) - BANDWIDTH_FIELDS
        if unknown:
            raise PlatformError(f"Unknown bandwidth fields {sorted(unknown)}")
        try:
            bandwidth[(int(entry["from"]), int(entry["to"]))] = float(entry["bytes_per_sec"])
        except KeyError as e:
            raise PlatformError(f"Bandwidth entry missing field {e}") from e
    return Platform(units=tuple(units), default_unit=int(doc["default_unit"]), bandwidth=bandwidth)


def platform_to_dict(platform: Platform) -> Dict[str, Any]:
    return {
        "units": [
            {
                "id": u.id,
                "kind": u.kind.value,
                "cores": u.cores,
                "per_core_rate": u.per_core_rate,
                "area_capacity": u.area_capacity,
                "stream_startup": u.stream_startup,
            }
            for u in platform.units
        ],
        "default_unit": platform.default_unit,
        "bandwidth": [
            {"from": a, "to": b, "bytes_per_sec": rate}
            for (a, b), rate in sorted(platform.bandwidth.items())
        ],
    }


def load_platform(path: str) -> Platform:
    """
    Load a platform JSON file

    Args:
        path: Path of the platform file

    Returns:
        The parsed Platform
    """
    try:
        with open(path, "r") as f:
            doc = json.load(f)
    except OSError as e:
        raise PlatformError(f"Cannot read platform file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise PlatformError(f"Platform file {path} is not valid JSON: {e}") from e
    platform = platform_from_dict(doc)
    logger.debug(f"Loaded platform with units {platform.unit_ids} from {path}")
    return platform


def uniform_bandwidth(unit_ids: Sequence[int], rate: float) -> Dict[Tuple[int, int], float]:
    """Full ordered-pair bandwidth table with one rate everywhere"""
    return {(a, b): rate for a in unit_ids for b in unit_ids if a != b}



_default_platform = None


def get_default_platform() -> Platform:
    """Get the configured default platform, loaded once"""
    global _default_platform
    if _default_platform is None:
        _default_platform = load_platform(config.DEFAULT_PLATFORM_FILE)
    return _default_platform
