"""
Benchmark Service
This module runs mapping experiments and assembles their result tables:

1. Build one graph per (axis point, seed) from the generator or a workflow set
2. Run every requested algorithm through the mapper registry
3. Score each mapping with the reporting evaluator against the all-default mapping
4. Emit one row per (axis point, algorithm, seed), sorted, with a fixed column order

Cells are independent; with max_workers > 1 they run in a process pool.
"""
import json
import logging
import os
import re
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd

import config
from services.evaluator import EvalConfig, MakespanEvaluator, relative_improvement
from services.genetic import GAConfig
from services.generators import AttributeDistribution, GenConfig, augment_attributes, generate, load_workflow
from services.mappers import ALGORITHMS, run_algorithm
from services.platform import Platform, load_platform
from services.taskgraph import TaskGraph

logger = logging.getLogger(__name__)

COLUMNS = ["axis", "algorithm", "seed", "makespan_baseline", "makespan_mapped",
           "rel_improvement", "mapper_ms", "eval_calls"]
SUMMARY_COLUMNS = ["axis", "algorithm", "runs", "mean_rel_improvement", "improved_fraction",
                   "mean_mapper_ms", "total_mapper_ms", "mean_eval_calls"]
AXES = ("n_tasks", "extra_edges", "workflow")


class ExperimentError(ValueError):
    """Invalid experiment description or unreadable input files"""


@dataclass(frozen=True)
class ExperimentSpec:
    """
    One benchmark sweep.

    Args:
        algorithms: Registry names to compare
        axis: "n_tasks", "extra_edges" (at fixed n_tasks) or "workflow"
        values: Axis points for the generator axes
        n_tasks: Graph size for the extra_edges axis
        workflows: Workflow files or directories for the workflow axis
        repetitions: Graphs per axis point; seeds default to 0..repetitions-1
        seeds: Explicit seeds, overriding repetitions
        platform: Platform file (None means the configured default)
    """
    algorithms: Tuple[str, ...]
    axis: str = "n_tasks"
    values: Tuple[int, ...] = ()
    n_tasks: int = 100
    workflows: Tuple[str, ...] = ()
    repetitions: int = config.BENCH_REPETITIONS
    seeds: Optional[Tuple[int, ...]] = None
    platform: Optional[str] = None
    eval: EvalConfig = field(default_factory=EvalConfig)
    gamma: float = config.GAMMA
    ga: Optional[GAConfig] = None
    distribution: AttributeDistribution = field(default_factory=AttributeDistribution)
    edge_bytes: float = config.DEFAULT_EDGE_BYTES
    timing_repeats: int = config.TIMING_REPEATS

    def __post_init__(self):
        if not self.algorithms:
            raise ExperimentError("Experiment needs at least one algorithm")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ExperimentError(f"Unknown algorithms {unknown}, expected a subset of {sorted(ALGORITHMS)}")
        if self.axis not in AXES:
            raise ExperimentError(f"Unknown axis '{self.axis}', expected one of {AXES}")
        if self.repetitions < 1:
            raise ExperimentError("repetitions must be >= 1")
        if self.seeds is not None and not self.seeds:
            raise ExperimentError("seeds must not be empty")
        if self.axis == "workflow" and not self.workflows:
            raise ExperimentError("Workflow axis needs at least one workflow path")
        if self.axis != "workflow" and not self.values:
            raise ExperimentError(f"Axis '{self.axis}' needs values")
        if self.timing_repeats < 1:
            raise ExperimentError("timing_repeats must be >= 1")

    @property
    def seed_list(self) -> List[int]:
        return list(self.seeds) if self.seeds is not None else list(range(self.repetitions))


def spec_from_dict(doc: Dict[str, Any]) -> ExperimentSpec:
    """Parse an experiment JSON document; nested eval/ga/distribution objects map to their configs"""
    if not isinstance(doc, dict):
        raise ExperimentError("Experiment document must be an object")
    try:
        kwargs = dict(doc)
        for key in ("algorithms", "values", "workflows", "seeds"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(kwargs[key])
        if "eval" in kwargs:
            kwargs["eval"] = EvalConfig(**kwargs["eval"])
        if kwargs.get("ga") is not None:
            kwargs["ga"] = GAConfig(**kwargs["ga"])
        if "distribution" in kwargs:
            kwargs["distribution"] = AttributeDistribution(**kwargs["distribution"])
        return ExperimentSpec(**kwargs)
    except TypeError as e:
        raise ExperimentError(f"Invalid experiment document: {e}") from e


def load_spec(path: str) -> ExperimentSpec:
    try:
        with open(path, "r") as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ExperimentError(f"Cannot read experiment spec {path}: {e}") from e
    return spec_from_dict(doc)


def workflow_set_name(path: str) -> str:
    """Benchmark set of a workflow file: its stem up to the first '-' or '_'"""
    stem = os.path.splitext(os.path.basename(path))[0]
    return re.split(r"[-_]", stem, maxsplit=1)[0]


def _workflow_files(paths) -> List[str]:
    files = []
    for path in paths:
        if not os.path.exists(path) and not os.path.isabs(path):
            # specs shipped under data/ name paths relative to the project root
            path = os.path.join(config.BASE_DIR, path)
        if os.path.isdir(path):
            files.extend(os.path.join(path, name) for name in sorted(os.listdir(path)) if name.endswith(".json"))
        elif os.path.isfile(path):
            files.append(path)
        else:
            raise ExperimentError(f"Workflow path {path} does not exist")
    return files


def _cells(spec: ExperimentSpec) -> List[Tuple[Any, int, Dict[str, Any]]]:
    """(axis value, seed, graph source) for every graph of the sweep"""
    cells = []
    if spec.axis == "workflow":
        for path in _workflow_files(spec.workflows):
            for seed in spec.seed_list:
                cells.append((workflow_set_name(path), seed, {"workflow": path}))
        return cells
    for value in spec.values:
        for seed in spec.seed_list:
            if spec.axis == "n_tasks":
                gen = {"n_tasks": int(value), "extra_edges": 0}
            else:
                gen = {"n_tasks": spec.n_tasks, "extra_edges": int(value)}
            cells.append((value, seed, gen))
    return cells


def build_graph(spec: ExperimentSpec, seed: int, source: Dict[str, Any]) -> TaskGraph:
    if "workflow" in source:
        try:
            g = load_workflow(source["workflow"], source_bytes=spec.edge_bytes, external_inputs=True)
        except OSError as e:
            raise ExperimentError(f"Cannot read workflow {source['workflow']}: {e}") from e
        return augment_attributes(g, spec.distribution, seed, keep_complexity=True)
    cfg = GenConfig(n_tasks=source["n_tasks"], extra_edges=source["extra_edges"],
                    edge_bytes=spec.edge_bytes, seed=seed)
    return generate(cfg, spec.distribution)


def _run_cell(spec: ExperimentSpec, platform: Platform, axis, seed: int,
              source: Dict[str, Any]) -> List[Dict[str, Any]]:
    g = build_graph(spec, seed, source)
    eval_cfg = replace(spec.eval, seed=seed)
    evaluator = MakespanEvaluator(g, platform, eval_cfg)
    baseline = evaluator.evaluate(evaluator.default_mapping())
    rows = []
    for name in spec.algorithms:
        timings = []
        result = None
        for _ in range(spec.timing_repeats):
            result = run_algorithm(name, g, platform, seed=seed, eval_cfg=eval_cfg, gamma=spec.gamma, ga=spec.ga)
            timings.append(result.mapper_ms)
        rows.append({
            "axis": axis,
            "algorithm": name,
            "seed": seed,
            "makespan_baseline": baseline,
            "makespan_mapped": result.makespan,
            "rel_improvement": relative_improvement(baseline, result.makespan),
            "mapper_ms": statistics.median(timings),
            "eval_calls": result.evaluations,
        })
    return rows


def run_experiment(spec: ExperimentSpec, max_workers: int = config.MAX_WORKERS) -> pd.DataFrame:
    """
    Run a sweep and return its result table.

    Returns:
        DataFrame with COLUMNS, sorted by (axis, algorithm, seed)

    Raises:
        ExperimentError: unreadable platform or workflow files
    """
    try:
        platform = load_platform(spec.platform or config.DEFAULT_PLATFORM_FILE)
    except ValueError as e:
        raise ExperimentError(str(e)) from e
    cells = _cells(spec)
    logger.info(f"Running experiment over {len(cells)} graphs x {len(spec.algorithms)} algorithms "
                f"(axis {spec.axis})")

    rows: List[Dict[str, Any]] = []
    if max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(_run_cell, spec, platform, axis, seed, source) for axis, seed, source in cells]
            for future in futures:
                rows.extend(future.result())
    else:
        for i, (axis, seed, source) in enumerate(cells):
            rows.extend(_run_cell(spec, platform, axis, seed, source))
            logger.debug(f"Finished graph {i + 1}/{len(cells)} (axis {axis}, seed {seed})")

    table = pd.DataFrame(rows, columns=COLUMNS)
    table = table.sort_values(["axis", "algorithm", "seed"], kind="mergesort").reset_index(drop=True)
    logger.info(f"Experiment produced {len(table)} rows")
    return table


def summarize(table: pd.DataFrame) -> pd.DataFrame:
    """Per (axis, algorithm) aggregates, including the fraction of graphs that improved"""
    grouped = table.groupby(["axis", "algorithm"], sort=True)
    summary = grouped.agg(
        runs=("seed", "count"),
        mean_rel_improvement=("rel_improvement", "mean"),
        improved_fraction=("rel_improvement", lambda s: float((s > 0).mean())),
        mean_mapper_ms=("mapper_ms", "mean"),
        total_mapper_ms=("mapper_ms", "sum"),
        mean_eval_calls=("eval_calls", "mean"),
    ).reset_index()
    return summary[SUMMARY_COLUMNS]


def write_table(table: pd.DataFrame, path: Optional[str], fmt: str = "csv") -> str:
    """Serialize a table as CSV or JSON records; written to path when given, always returned"""
    if fmt == "json":
        text = table.to_json(orient="records", indent=2) + "\n"
    else:
        text = table.to_csv(index=False, float_format="%.10g")
    if path:
        with open(path, "w") as f:
            f.write(text)
    return text
