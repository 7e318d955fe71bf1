"""Real-valued genetic algorithm over flattened network weights.

A genome is every weight and bias of a fixed-topology network laid out
layer by layer, each layer's weight matrix row-major followed by its bias
vector. Fitness is the summed absolute output error over a dataset, so
lower is better.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .network import Dataset, Network, activation_apply

__all__ = [
    "WORST_FITNESS",
    "GAConfig",
    "GATrace",
    "Population",
    "flatten",
    "unflatten",
    "fitness",
    "rank_scale",
    "stochastic_universal_sampling",
    "scale_and_select",
    "crossover",
    "mutate",
    "evolve",
]

# Stand-in score for genomes whose forward pass is not finite. Large enough
# to lose every comparison, small enough that population means stay finite.
WORST_FITNESS = 1e300


def flatten(net: Network) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(net.weights, net.biases)])


def unflatten(genome, template: Network) -> Network:
    genes = np.asarray(genome, dtype=float)
    if genes.shape != (template.n_params,):
        raise ValueError(f"genome has {genes.size} genes, template needs {template.n_params}")
    weights, biases, i = [], [], 0
    for w, b in zip(template.weights, template.biases):
        weights.append(genes[i : i + w.size].reshape(w.shape).copy())
        i += w.size
        biases.append(genes[i : i + b.size].copy())
        i += b.size
    rng = template.input_range
    return Network(weights, biases, template.activations, None if rng is None else (rng[0].copy(), rng[1].copy()))


def _genome_forward(genes: np.ndarray, template: Network, X: np.ndarray) -> np.ndarray:
    # Same operations as network.forward, minus the Network construction.
    out, i = template.normalize(X), 0
    for w, b, act in zip(template.weights, template.biases, template.activations):
        W = genes[i : i + w.size].reshape(w.shape)
        i += w.size
        out = activation_apply(act, out @ W.T + genes[i : i + b.size])
        i += b.size
    return out


def fitness(genome, template: Network, data: Dataset) -> float:
    """Sum over samples and output units of ``|t - y|``."""
    genes = np.asarray(genome, dtype=float)
    if genes.shape != (template.n_params,):
        raise ValueError(f"genome has {genes.size} genes, template needs {template.n_params}")
    if template.input_dim != data.input_dim or template.output_dim != data.target_dim:
        raise ValueError("template network does not match dataset dimensions")
    if not np.all(np.isfinite(genes)):
        return WORST_FITNESS
    with np.errstate(over="ignore", invalid="ignore"):
        total = float(np.sum(np.abs(data.T - _genome_forward(genes, template, data.X))))
    return total if math.isfinite(total) else WORST_FITNESS


@dataclass
class Population:
    members: np.ndarray
    fitnesses: np.ndarray

    def __post_init__(self):
        self.members = np.asarray(self.members, dtype=float)
        self.fitnesses = np.asarray(self.fitnesses, dtype=float)
        if self.members.ndim != 2 or self.fitnesses.shape != (len(self.members),):
            raise ValueError("members and fitnesses must be parallel")

    def order(self) -> np.ndarray:
        """Indices from best to worst; ties keep population order."""
        return np.argsort(self.fitnesses, kind="stable")


def rank_scale(fitnesses) -> np.ndarray:
    """Selection probabilities proportional to ``1/sqrt(rank)``.

    Tied fitnesses share the mean score of the ranks they span, so a
    population of equals is selected uniformly.
    """
    f = np.asarray(fitnesses, dtype=float)
    order = np.argsort(f, kind="stable")
    raw = 1.0 / np.sqrt(np.arange(1, len(f) + 1))
    scores = np.empty(len(f))
    start = 0
    while start < len(f):
        stop = start + 1
        while stop < len(f) and f[order[stop]] == f[order[start]]:
            stop += 1
        scores[order[start:stop]] = raw[start:stop].mean()
        start = stop
    return scores / scores.sum()


def stochastic_universal_sampling(probabilities, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` indices from evenly spaced pointers with one random offset."""
    p = np.asarray(probabilities, dtype=float)
    edges = np.cumsum(p)
    edges[-1] = 1.0
    pointers = (rng.random() + np.arange(count)) / count
    return np.searchsorted(edges, pointers, side="right").clip(max=len(p) - 1)


def scale_and_select(population: Population, count: int, rng: np.random.Generator) -> np.ndarray:
    """Parent indices: rank scaling then stochastic universal sampling, shuffled for mating."""
    chosen = stochastic_universal_sampling(rank_scale(population.fitnesses), count, rng)
    return rng.permutation(chosen)


def crossover(parent_a, parent_b, cut_point: int) -> np.ndarray:
    """Single-point splice: genes before ``cut_point`` from ``a``, the rest from ``b``."""
    a = np.asarray(parent_a, dtype=float)
    b = np.asarray(parent_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("parents must be equal-length vectors")
    if not 0 < cut_point < len(a):
        raise ValueError(f"cut point must lie in (0, {len(a)}), got {cut_point}")
    return np.concatenate([a[:cut_point], b[cut_point:]])


def mutate(genome, sigma: float, rng: np.random.Generator) -> np.ndarray:
    genes = np.asarray(genome, dtype=float)
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return genes.copy()
    return genes + rng.normal(0.0, sigma, size=genes.shape)


@dataclass
class GAConfig:
    """GA settings.

    ``mutation_sigma`` is multiplied by ``sigma_decay`` after every
    generation; set ``sigma_decay=1`` for a fixed mutation scale.
    """

    population_size: int = 50
    elite_count: int = 2
    crossover_fraction: float = 0.8
    mutation_sigma: float = 0.1
    sigma_decay: float = 0.99
    max_generations: int = 2000
    fitness_tolerance: float = 1e-5
    init_scale: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not 1 <= self.elite_count < self.population_size:
            raise ValueError("elite_count must satisfy 1 <= elite_count < population_size")
        if not 0.0 <= self.crossover_fraction <= 1.0:
            raise ValueError("crossover_fraction must lie in [0, 1]")
        if not self.mutation_sigma > 0:
            raise ValueError("mutation_sigma must be positive")
        if not 0 < self.sigma_decay <= 1:
            raise ValueError("sigma_decay must lie in (0, 1]")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if not self.fitness_tolerance > 0:
            raise ValueError("fitness_tolerance must be positive")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be positive")


@dataclass
class GATrace:
    best: list[float] = field(default_factory=list)
    mean: list[float] = field(default_factory=list)
    converged: bool = False
    best_genome: np.ndarray | None = None

    @property
    def generations_run(self) -> int:
        return len(self.best)

    @property
    def best_fitness(self) -> float:
        return self.best[-1] if self.best else math.inf


def evolve(
    template: Network,
    data: Dataset,
    config: GAConfig | None = None,
    initial_seeds: Sequence | None = None,
) -> tuple[Network, GATrace]:
    """Minimise :func:`fitness` over genomes shaped like ``template``.

    Generation 0 holds ``initial_seeds`` verbatim, topped up with genomes
    drawn uniformly from ``[-init_scale, init_scale]``. Each generation is
    scored, the ``elite_count`` best pass through unchanged, and the other
    slots are filled with crossover children (``crossover_fraction`` of
    them) and mutants of rank-selected parents. The run stops when the best
    fitness reaches ``fitness_tolerance`` or after ``max_generations``
    scored generations.
    """
    config = config or GAConfig()
    if template.input_dim != data.input_dim or template.output_dim != data.target_dim:
        raise ValueError("template network does not match dataset dimensions")
    rng = np.random.default_rng(config.rng_seed)
    size, length = config.population_size, template.n_params

    seeds = [np.asarray(s, dtype=float) for s in (initial_seeds or [])]
    if len(seeds) > size:
        raise ValueError(f"{len(seeds)} initial seeds exceed population_size {size}")
    for s in seeds:
        if s.shape != (length,):
            raise ValueError(f"initial seed has {s.size} genes, template needs {length}")
    fill = rng.uniform(-config.init_scale, config.init_scale, size=(size - len(seeds), length))
    members = np.vstack(seeds + [fill]) if seeds else fill
    scores = np.array([fitness(g, template, data) for g in members])

    n_children = size - config.elite_count
    n_cross = int(round(config.crossover_fraction * n_children))
    n_mut = n_children - n_cross
    sigma = config.mutation_sigma
    trace = GATrace()

    for generation in range(config.max_generations):
        pop = Population(members, scores)
        order = pop.order()
        trace.best.append(float(scores[order[0]]))
        trace.mean.append(float(np.mean(scores)))
        trace.best_genome = members[order[0]]
        if scores[order[0]] <= config.fitness_tolerance:
            trace.converged = True
            break
        if generation == config.max_generations - 1:
            break

        elites = order[: config.elite_count]
        parents = scale_and_select(pop, 2 * n_cross + n_mut, rng)
        children = []
        for i in range(n_cross):
            a, b = members[parents[2 * i]], members[parents[2 * i + 1]]
            cut = int(rng.integers(1, length)) if length > 1 else 0
            children.append(crossover(a, b, cut) if length > 1 else a.copy())
        for i in range(n_mut):
            children.append(mutate(members[parents[2 * n_cross + i]], sigma, rng))
        child_scores = [fitness(c, template, data) for c in children]

        members = np.vstack([members[elites]] + ([np.array(children)] if children else []))
        scores = np.concatenate([scores[elites], child_scores])
        sigma *= config.sigma_decay

    return unflatten(trace.best_genome, template), trace
