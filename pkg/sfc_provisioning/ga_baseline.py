"""
sfc_provisioning/ga_baseline.py

Genetic-algorithm placement baseline built on DEAP.

A chromosome is a list of node indices, one gene per (chain, position) slot
in chain order. Every chromosome decodes to a complete placement; capacity
violations are penalised so that any infeasible chromosome scores below
every feasible one.
"""

import logging
import random
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from deap import base, creator, tools

from .delay_model import reference_objective, unit_processing_delay, unit_transmission_delay
from .scenario import Scenario
from .topology import PlacementMatrix, capacity_violation, chain_slots

logger = logging.getLogger(__name__)

# DEAP operators draw from the global `random` module.
_RANDOM_LOCK = threading.Lock()

if not hasattr(creator, "PlacementFitness"):
    creator.create("PlacementFitness", base.Fitness, weights=(1.0,))
if not hasattr(creator, "Chromosome"):
    creator.create("Chromosome", list, fitness=creator.PlacementFitness)


@dataclass
class GaConfig:
    population_size: int = 50
    generations: int = 200
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1
    tournament_size: int = 3
    infeasibility_penalty: float = 1000.0
    seed: int = 0

    def validate(self):
        for name in ("crossover_rate", "mutation_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.population_size < 1 or self.tournament_size < 1:
            raise ValueError("population_size and tournament_size must be at least 1")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        if self.infeasibility_penalty < 0:
            raise ValueError("infeasibility_penalty must be non-negative")


def decode_chromosome(genes: Sequence[int], scenario: Scenario) -> PlacementMatrix:
    topology = scenario.topology
    slots = chain_slots(topology, scenario.chains)
    if len(genes) != len(slots):
        raise ValueError(f"Chromosome has {len(genes)} genes, expected {len(slots)}")
    entries = np.zeros(
        (len(topology.nodes), len(topology.vnfs), len(scenario.chains)), dtype=np.int8
    )
    for (k, _, j), i in zip(slots, genes):
        entries[int(i), j, k] = 1
    return PlacementMatrix(entries, topology.node_ids, topology.vnf_ids, scenario.chain_ids)


def encode_placement(placement: PlacementMatrix, scenario: Scenario) -> List[int]:
    topology = scenario.topology
    genes = []
    for chain in scenario.chains:
        for vnf_id in chain.vnf_sequence:
            genes.append(topology.node_index(placement.node_of(vnf_id, chain.id)))
    return genes


def objective_upper_bound(scenario: Scenario, packet_sizes: Sequence[float]) -> float:
    """Worst-case objective over every complete placement."""
    topology = scenario.topology
    node_ids = topology.node_ids
    bound = 0.0
    for beta in packet_sizes:
        for chain in scenario.chains:
            bound += sum(
                max(unit_processing_delay(topology, i, v, beta) for i in node_ids)
                for v in chain.vnf_sequence
            )
            for vnf_id, next_vnf_id in chain.hops():
                worst = 0.0
                for i in node_ids:
                    for i_next in node_ids:
                        if i == i_next or topology.links.allocation_for(
                            i, vnf_id, i_next, next_vnf_id
                        ) is None:
                            continue
                        worst = max(
                            worst,
                            unit_transmission_delay(
                                topology, i, vnf_id, i_next, next_vnf_id, beta
                            ),
                        )
                bound += worst
    return bound


def fitness(
    genes: Sequence[int],
    scenario: Scenario,
    packet_sizes: Optional[Sequence[float]] = None,
    penalty: float = 1000.0,
    upper_bound: Optional[float] = None,
) -> float:
    """
    -objective for capacity-feasible chromosomes. Infeasible ones score
    -(objective upper bound + penalty x relative overload), which is below
    every feasible score.
    """
    packet_sizes = packet_sizes or [scenario.reference_packet_size]
    placement = decode_chromosome(genes, scenario)
    violation = capacity_violation(placement, scenario.topology)
    if violation > 0:
        if upper_bound is None:
            upper_bound = objective_upper_bound(scenario, packet_sizes)
        return -(upper_bound + penalty * violation)
    return -reference_objective(placement, scenario.topology, scenario.chains, packet_sizes)


@dataclass
class GenerationRecord:
    generation: int
    best: float
    mean: float


@dataclass
class EvolutionResult:
    best: List[int]
    best_fitness: float
    placement: PlacementMatrix
    history: List[GenerationRecord] = field(default_factory=list)
    evaluations: int = 0

    def history_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [{"generation": r.generation, "best": r.best, "mean": r.mean} for r in self.history],
            columns=["generation", "best", "mean"],
        )


def evolve(
    config: GaConfig,
    scenario: Scenario,
    packet_sizes: Optional[Sequence[float]] = None,
    progress_callback: Optional[Callable[[int, int, str], None]] = None,
) -> EvolutionResult:
    """
    Tournament selection, one-point crossover, per-gene uniform mutation and
    an elite of one (the hall of fame re-enters every generation).
    """
    config.validate()
    packet_sizes = list(packet_sizes or [scenario.reference_packet_size])
    n_nodes = len(scenario.topology.nodes)
    n_genes = len(chain_slots(scenario.topology, scenario.chains))
    upper_bound = objective_upper_bound(scenario, packet_sizes)
    cache: Dict[Tuple[int, ...], float] = {}

    def _evaluate(individual) -> Tuple[float]:
        key = tuple(individual)
        if key not in cache:
            cache[key] = fitness(
                key, scenario, packet_sizes, config.infeasibility_penalty, upper_bound
            )
        return (cache[key],)

    toolbox = base.Toolbox()
    toolbox.register("gene", random.randrange, n_nodes)
    toolbox.register("individual", tools.initRepeat, creator.Chromosome, toolbox.gene, n_genes)
    toolbox.register("population", tools.initRepeat, list, toolbox.individual)
    toolbox.register("evaluate", _evaluate)
    toolbox.register("mate", tools.cxOnePoint)
    toolbox.register(
        "mutate", tools.mutUniformInt, low=0, up=n_nodes - 1, indpb=config.mutation_rate
    )
    toolbox.register("select", tools.selTournament, tournsize=config.tournament_size)

    def _record(generation, population, hof, history):
        scores = [ind.fitness.values[0] for ind in population]
        history.append(
            GenerationRecord(generation, hof[0].fitness.values[0], float(np.mean(scores)))
        )

    with _RANDOM_LOCK:
        random.seed(config.seed)
        population = toolbox.population(n=config.population_size)
        for ind in population:
            ind.fitness.values = toolbox.evaluate(ind)
        hof = tools.HallOfFame(1)
        hof.update(population)
        history: List[GenerationRecord] = []
        _record(0, population, hof, history)

        for generation in range(1, config.generations + 1):
            offspring = [
                toolbox.clone(ind)
                for ind in toolbox.select(population, config.population_size - 1)
            ]
            for a, b in zip(offspring[::2], offspring[1::2]):
                if n_genes > 1 and random.random() < config.crossover_rate:
                    toolbox.mate(a, b)
                    del a.fitness.values, b.fitness.values
            for ind in offspring:
                if config.mutation_rate > 0:
                    toolbox.mutate(ind)
                    del ind.fitness.values
            for ind in offspring:
                if not ind.fitness.valid:
                    ind.fitness.values = toolbox.evaluate(ind)

            population = [toolbox.clone(hof[0])] + offspring
            hof.update(population)
            _record(generation, population, hof, history)
            if progress_callback and generation % 20 == 0:
                progress_callback(
                    generation, config.generations, f"best {hof[0].fitness.values[0]:.3f}"
                )

        best = list(hof[0])
        best_fitness = hof[0].fitness.values[0]

    logger.info(
        f"GA finished {config.generations} generations (seed {config.seed}): "
        f"best fitness {best_fitness:.6g}, {len(cache)} distinct chromosomes evaluated"
    )
    return EvolutionResult(
        best=best,
        best_fitness=best_fitness,
        placement=decode_chromosome(best, scenario),
        history=history,
        evaluations=len(cache),
    )
