"""
Genetic Mapping Service
Single-objective elitist genetic algorithm in the NSGA-II style, used as a reference mapper:

1. Genome: one unit id per task, genes in breadth-first topological order
2. Binary tournament selection, single-point crossover, per-gene uniform mutation
3. Repair moves FPGA-overflow tasks back to the default unit (largest area first)
4. Parents and offspring are merged and the best individuals survive

With one objective the non-dominated sort degenerates to ordering by makespan.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

import config
from services.evaluator import EvalConfig, MakespanEvaluator, Mapping
from services.platform import Platform
from services.taskgraph import TaskGraph, bfs_order

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GAConfig:
    population: int = config.GA_POPULATION
    generations: int = config.GA_GENERATIONS
    crossover_rate: float = config.GA_CROSSOVER_RATE
    mutation_rate: Optional[float] = None  # None means 1/n
    seed: int = config.DEFAULT_SEED
    stall_generations: Optional[int] = None

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ValueError("crossover_rate must be in [0, 1]")
        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must be in [0, 1]")
        if self.stall_generations is not None and self.stall_generations < 1:
            raise ValueError("stall_generations must be >= 1")


class GeneticMapper:
    """
    One GA run over a fixed graph and platform.

    Fitness is the evaluator's internal cost, memoized per genome. `history` holds the best
    fitness after every generation and never increases.
    """

    def __init__(self, g: TaskGraph, p: Platform, ga: Optional[GAConfig] = None,
                 eval_cfg: Optional[EvalConfig] = None):
        self.g = g
        self.platform = p
        self.ga = ga or GAConfig()
        self.evaluator = MakespanEvaluator(g, p, eval_cfg)
        self.rng = np.random.default_rng(self.ga.seed)
        self.gene_order = bfs_order(g)
        self.unit_ids = np.array(p.unit_ids)
        self.default_index = p.index_of(p.default_unit)
        self.mutation_rate = self.ga.mutation_rate if self.ga.mutation_rate is not None else 1.0 / max(1, g.num_nodes)
        self.history: List[float] = []
        self.best_fitness = float("inf")
        self.best_genome: Optional[Tuple[int, ...]] = None
        self._fitness: Dict[Tuple[int, ...], float] = {}

        self._fpga_area = {i: u.area_capacity for i, u in enumerate(p.units) if u.is_fpga}
        self._area = np.array([g.attributes[v].area for v in self.gene_order])

    def to_mapping(self, genome) -> Mapping:
        assignment = [0] * self.g.num_nodes
        for position, v in enumerate(self.gene_order):
            assignment[v] = int(self.unit_ids[genome[position]])
        return Mapping(tuple(assignment))

    def fitness(self, genome: np.ndarray) -> float:
        key = tuple(int(x) for x in genome)
        if key not in self._fitness:
            self._fitness[key] = self.evaluator.cost(self.to_mapping(key))
        return self._fitness[key]

    def repair(self, genome: np.ndarray) -> np.ndarray:
        for ui, capacity in self._fpga_area.items():
            placed = np.flatnonzero(genome == ui)
            usage = float(self._area[placed].sum())
            if usage <= capacity + 1e-9:
                continue
            # stable sort keeps earlier genes first among equal areas
            for position in placed[np.argsort(-self._area[placed], kind="stable")]:
                if usage <= capacity + 1e-9:
                    break
                genome[position] = self.default_index
                usage -= self._area[position]
        return genome

    def _initial_population(self) -> List[np.ndarray]:
        n, k = self.g.num_nodes, len(self.unit_ids)
        population = [np.full(n, self.default_index, dtype=int)]
        while len(population) < self.ga.population:
            population.append(self.repair(self.rng.integers(0, k, size=n)))
        return population

    def _tournament(self, population: List[np.ndarray], scores: List[float]) -> np.ndarray:
        a, b = self.rng.integers(0, len(population), size=2)
        if scores[b] < scores[a] or (scores[b] == scores[a] and b < a):
            a = b
        return population[a]

    def _offspring(self, population: List[np.ndarray], scores: List[float]) -> List[np.ndarray]:
        n, k = self.g.num_nodes, len(self.unit_ids)
        children = []
        while len(children) < self.ga.population:
            first = self._tournament(population, scores).copy()
            second = self._tournament(population, scores).copy()
            if n > 1 and self.rng.random() < self.ga.crossover_rate:
                point = int(self.rng.integers(1, n))
                first[point:], second[point:] = second[point:].copy(), first[point:].copy()
            for child in (first, second):
                mask = self.rng.random(n) < self.mutation_rate
                if mask.any():
                    child[mask] = self.rng.integers(0, k, size=int(mask.sum()))
                children.append(self.repair(child))
        return children[:self.ga.population]

    def run(self) -> Mapping:
        population = self._initial_population()
        scores = [self.fitness(x) for x in population]
        self._record(population, scores)
        stalled = 0
        for generation in range(self.ga.generations):
            children = self._offspring(population, scores)
            merged = population + children
            merged_scores = scores + [self.fitness(x) for x in children]
            # stable: parents win ties against offspring
            survivors = sorted(range(len(merged)), key=lambda i: merged_scores[i])[:self.ga.population]
            population = [merged[i] for i in survivors]
            scores = [merged_scores[i] for i in survivors]
            previous = self.best_fitness
            self._record(population, scores)
            stalled = stalled + 1 if self.best_fitness >= previous else 0
            if self.ga.stall_generations is not None and stalled >= self.ga.stall_generations:
                logger.info(f"GA stopped after {generation + 1} generations without improvement for {stalled}")
                break
        logger.debug(f"GA best fitness {self.best_fitness:.6g} after {len(self.history)} generations, "
                     f"{self.evaluator.calls} evaluations")
        return self.to_mapping(self.best_genome)

    def _record(self, population: List[np.ndarray], scores: List[float]):
        best = int(np.argmin(scores))
        if scores[best] < self.best_fitness or self.best_genome is None:
            self.best_fitness = scores[best]
            self.best_genome = tuple(int(x) for x in population[best])
        self.history.append(self.best_fitness)


def nsga2_map(g: TaskGraph, p: Platform, ga: Optional[GAConfig] = None,
              eval_cfg: Optional[EvalConfig] = None) -> Mapping:
    """Best-ever individual of a seeded GA run"""
    return GeneticMapper(g, p, ga, eval_cfg).run()
