"""Population management and the three structure-variation operators.

Each generation keeps the top ``elite_k`` members verbatim (elitism, which
makes the best score monotone) and refills the remaining slots with children
of uniformly drawn elite parents, applying one of:

  * full structure mutation: Gaussian jitter of every Cartesian position plus
    a mild random rescale of the cell lengths, to probe new scaffolding;
  * atom replacement or addition, to probe new chemistry;
  * slab crossover: splice the sites of two parents across a cutting plane,
    averaging the parents' cell parameters to reconcile their axes.

Every slot derives its own random stream from (seed, stream key, slot index),
so candidate generation is reproducible and may run in parallel with results
identical to a serial run.  The worker count is capped by the
CRYSTAL_EVOLVE_THREADS environment variable (default: machine cores).
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import geometry
from .errors import (
    ConfigError,
    EdgelessGraphError,
    PoolTooSmallError,
    SingleElementUniverseError,
)
from .fitness import PropertyVector
from .structures import AtomSite, CrystalStructure

OPERATOR_NAMES = ("struct_mut", "replace", "add", "crossover")

# metals highlighted by prior screening work; always admitted alongside the
# elements already present in the seed pool
EXTRA_ALLOWED_ELEMENTS = ("Mg", "Se", "Sn", "Zn")


@dataclass(frozen=True)
class EvolutionConfig:
    pool_size: int = 500
    elite_k: int = 50
    generations: int = 15
    p_struct_mut: float = 0.2
    p_replace: float = 0.4
    p_add: float = 0.1
    p_crossover: float = 0.3
    struct_mut_sigma: float = 0.3
    allowed_elements: tuple[str, ...] | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.pool_size < 1 or self.generations < 0:
            raise ConfigError("pool_size must be >= 1 and generations >= 0")
        if not 1 <= self.elite_k <= self.pool_size:
            raise ConfigError(
                f"elite_k={self.elite_k} must be in 1..pool_size={self.pool_size}"
            )
        if self.struct_mut_sigma < 0:
            raise ConfigError("struct_mut_sigma must be >= 0")
        total = self.p_struct_mut + self.p_replace + self.p_add + self.p_crossover
        if abs(total - 1.0) > 1e-12:
            raise ConfigError(f"operator probabilities sum to {total!r}, not 1")
        if any(p < 0 for p in self.probabilities):
            raise ConfigError("operator probabilities must be non-negative")
        if self.allowed_elements is not None:
            object.__setattr__(self, "allowed_elements", tuple(self.allowed_elements))

    @property
    def probabilities(self) -> tuple[float, float, float, float]:
        return (self.p_struct_mut, self.p_replace, self.p_add, self.p_crossover)

    def to_dict(self) -> dict:
        return {
            "pool_size": self.pool_size,
            "elite_k": self.elite_k,
            "generations": self.generations,
            "p_struct_mut": self.p_struct_mut,
            "p_replace": self.p_replace,
            "p_add": self.p_add,
            "p_crossover": self.p_crossover,
            "struct_mut_sigma": self.struct_mut_sigma,
            "allowed_elements": list(self.allowed_elements) if self.allowed_elements else None,
            "rng_seed": self.rng_seed,
        }


class Member(NamedTuple):
    structure: CrystalStructure
    properties: PropertyVector
    fitness: float


@dataclass
class Population:
    members: list[Member]
    generation_index: int


@dataclass
class GenerationRecord:
    generation_index: int
    fitness_min: float
    fitness_mean: float
    fitness_max: float
    elite_ids: list[str]
    histogram: list[tuple[float, float, int]]  # 20 bins of (low, high, count)

    def to_dict(self) -> dict:
        return {
            "generation_index": self.generation_index,
            "fitness_min": self.fitness_min,
            "fitness_mean": self.fitness_mean,
            "fitness_max": self.fitness_max,
            "elite_ids": self.elite_ids,
            "histogram": [
                {"low": lo, "high": hi, "count": count}
                for lo, hi, count in self.histogram
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationRecord":
        return cls(
            generation_index=d["generation_index"],
            fitness_min=d["fitness_min"],
            fitness_mean=d["fitness_mean"],
            fitness_max=d["fitness_max"],
            elite_ids=list(d["elite_ids"]),
            histogram=[(b["low"], b["high"], b["count"]) for b in d["histogram"]],
        )


N_HISTOGRAM_BINS = 20


# --------------------------------------------------------------------------
# operators

def _child_id(tag: str, parent_ids: str, rng: np.random.Generator) -> str:
    token = int(rng.integers(0, 2 ** 63 - 1))
    digest = hashlib.sha1(f"{parent_ids}/{tag}/{token}".encode()).hexdigest()[:16]
    return f"{tag}-{digest}"


def mutate_structure(s: CrystalStructure, sigma: float,
                     rng: np.random.Generator) -> CrystalStructure:
    """Jitter every Cartesian position by N(0, sigma) per component and scale
    each cell length by N(1, sigma/10) clamped to [0.8, 1.2]; elements stay."""
    lattice = s.lattice()
    cart = geometry.frac_to_cart(lattice, s.frac_coords())
    cart = cart + rng.normal(0.0, sigma, size=cart.shape)
    frac = geometry.wrap_frac(geometry.cart_to_frac(lattice, cart))
    factors = np.clip(rng.normal(1.0, sigma / 10.0, size=3), 0.8, 1.2)
    sites = tuple(
        AtomSite(site.element, *frac[k]) for k, site in enumerate(s.sites)
    )
    return CrystalStructure(
        id=_child_id("sm", s.id, rng),
        a=s.a * factors[0], b=s.b * factors[1], c=s.c * factors[2],
        alpha=s.alpha, beta=s.beta, gamma=s.gamma,
        sites=sites,
    )


def mutate_atoms(s: CrystalStructure, mode: str, allowed_elements: Sequence[str],
                 rng: np.random.Generator) -> CrystalStructure:
    """replace: resample one site's element from the allowed set minus its
    current element; add: insert one new site at uniform fractional
    coordinates with a uniformly drawn allowed element."""
    allowed = tuple(allowed_elements)
    if not allowed:
        raise ConfigError("allowed_elements is empty")
    if mode == "replace":
        eligible = [k for k, site in enumerate(s.sites)
                    if any(el != site.element for el in allowed)]
        if not eligible:
            raise SingleElementUniverseError(
                f"structure {s.id!r}: every site already holds the only allowed element"
            )
        k = eligible[int(rng.integers(0, len(eligible)))]
        choices = tuple(el for el in allowed if el != s.sites[k].element)
        new_el = choices[int(rng.integers(0, len(choices)))]
        site = s.sites[k]
        sites = (s.sites[:k]
                 + (AtomSite(new_el, site.fx, site.fy, site.fz),)
                 + s.sites[k + 1:])
    elif mode == "add":
        coords = rng.random(3)
        new_el = allowed[int(rng.integers(0, len(allowed)))]
        sites = s.sites + (AtomSite(new_el, *coords),)
    else:
        raise ConfigError(f"unknown atom mutation mode {mode!r}")
    return CrystalStructure(
        id=_child_id("re" if mode == "replace" else "ad", s.id, rng),
        a=s.a, b=s.b, c=s.c, alpha=s.alpha, beta=s.beta, gamma=s.gamma,
        sites=sites,
    )


def crossover_slab(a: CrystalStructure, b: CrystalStructure,
                   rng: np.random.Generator,
                   axis: int | None = None,
                   cut: float | None = None) -> CrystalStructure:
    """Splice a's sites below a fractional cutting plane with b's sites above.

    The child cell is the parameter-wise mean of the parents', which resolves
    their axis mismatch.  If eight (axis, cut) draws all leave one side empty,
    parent ``a`` is returned unchanged as a failed crossover.  ``axis`` and
    ``cut`` pin the draw for testing.
    """
    forced = axis is not None or cut is not None
    for _ in range(8):
        u = axis if axis is not None else int(rng.integers(0, 3))
        c = cut if cut is not None else float(rng.uniform(0.3, 0.7))
        lower = [site for site in a.sites if site.frac()[u] < c]
        upper = [site for site in b.sites if site.frac()[u] >= c]
        if lower and upper:
            return CrystalStructure(
                id=_child_id("xo", f"{a.id}+{b.id}", rng),
                a=(a.a + b.a) / 2.0, b=(a.b + b.b) / 2.0, c=(a.c + b.c) / 2.0,
                alpha=(a.alpha + b.alpha) / 2.0,
                beta=(a.beta + b.beta) / 2.0,
                gamma=(a.gamma + b.gamma) / 2.0,
                sites=tuple(lower + upper),
            )
        if forced:
            break
    return a


# --------------------------------------------------------------------------
# population stepping

def _worker_count(n_tasks: int) -> int:
    raw = os.environ.get("CRYSTAL_EVOLVE_THREADS", "").strip()
    cap = int(raw) if raw else (os.cpu_count() or 1)
    return max(1, min(cap, n_tasks))


def _evaluate_many(structures: Sequence[CrystalStructure],
                   evaluate: Callable[[CrystalStructure], tuple[PropertyVector, float]],
                   ) -> list[Member]:
    workers = _worker_count(len(structures))
    if workers == 1 or len(structures) < 8:
        results = [evaluate(s) for s in structures]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(evaluate, structures))
    return [Member(s, props, fit) for s, (props, fit) in zip(structures, results)]


def seed_population(pool: Sequence[CrystalStructure],
                    evaluate: Callable[[CrystalStructure], tuple[PropertyVector, float]],
                    config: EvolutionConfig) -> Population:
    """Evaluate the first pool_size structures of the caller-ordered pool."""
    if len(pool) < config.pool_size:
        raise PoolTooSmallError(
            f"pool has {len(pool)} structures, need pool_size={config.pool_size}"
        )
    members = _evaluate_many(list(pool[: config.pool_size]), evaluate)
    return Population(members=members, generation_index=0)


def select_elite(pop: Population, k: int) -> list[Member]:
    """Top-k by fitness descending, ties broken by id ascending."""
    return sorted(pop.members, key=lambda m: (-m.fitness, m.structure.id))[:k]


def population_record(pop: Population, elite_k: int) -> GenerationRecord:
    values = np.array([m.fitness for m in pop.members])
    lo, hi = float(values.min()), float(values.max())
    span_lo, span_hi = (lo, hi) if hi > lo else (lo - 0.5, hi + 0.5)
    edges = np.linspace(span_lo, span_hi, N_HISTOGRAM_BINS + 1)
    counts, _ = np.histogram(values, bins=edges)
    return GenerationRecord(
        generation_index=pop.generation_index,
        fitness_min=lo,
        fitness_mean=float(values.mean()),
        fitness_max=hi,
        elite_ids=[m.structure.id for m in select_elite(pop, elite_k)],
        histogram=[
            (float(edges[k]), float(edges[k + 1]), int(counts[k]))
            for k in range(N_HISTOGRAM_BINS)
        ],
    )


def _slot_rng(seed: int, stream_key: tuple[int, ...], slot: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream_key) + (slot,))
    return np.random.Generator(np.random.PCG64(ss))


def _draw_operator(rng: np.random.Generator, config: EvolutionConfig) -> str:
    return OPERATOR_NAMES[int(rng.choice(len(OPERATOR_NAMES), p=config.probabilities))]


def _allowed_elements(config: EvolutionConfig,
                      elite: Sequence[Member]) -> tuple[str, ...]:
    if config.allowed_elements is not None:
        return config.allowed_elements
    seen = {site.element for m in elite for site in m.structure.sites}
    seen.update(EXTRA_ALLOWED_ELEMENTS)
    return tuple(sorted(seen))


_MAX_SLOT_ATTEMPTS = 20


def _produce_slot(slot: int,
                  elite: list[Member],
                  evaluate: Callable[[CrystalStructure], tuple[PropertyVector, float]],
                  config: EvolutionConfig,
                  allowed: tuple[str, ...],
                  stream_key: tuple[int, ...]) -> Member:
    rng = _slot_rng(config.rng_seed, stream_key, slot)
    parent = elite[0]
    for _ in range(_MAX_SLOT_ATTEMPTS):
        op = _draw_operator(rng, config)
        parent = elite[int(rng.integers(0, len(elite)))]
        try:
            if op == "struct_mut":
                child = mutate_structure(parent.structure, config.struct_mut_sigma, rng)
            elif op == "replace":
                child = mutate_atoms(parent.structure, "replace", allowed, rng)
            elif op == "add":
                child = mutate_atoms(parent.structure, "add", allowed, rng)
            else:
                other = elite[int(rng.integers(0, len(elite)))]
                child = crossover_slab(parent.structure, other.structure, rng)
                if child is parent.structure:  # failed crossover keeps the parent
                    return parent
        except SingleElementUniverseError:
            continue
        try:
            props, fit = evaluate(child)
        except EdgelessGraphError:
            continue  # discard and regenerate
        return Member(child, props, fit)
    return parent  # give up on this slot; copy the last drawn parent


def step_generation(pop: Population,
                    evaluate: Callable[[CrystalStructure], tuple[PropertyVector, float]],
                    config: EvolutionConfig,
                    stream_key: tuple[int, ...] | None = None,
                    ) -> tuple[Population, GenerationRecord]:
    """Advance one generation; returns the next population and the record of
    the input population."""
    record = population_record(pop, config.elite_k)
    elite = select_elite(pop, config.elite_k)
    allowed = _allowed_elements(config, elite)
    key = tuple(stream_key) if stream_key is not None else (pop.generation_index,)
    slots = range(config.pool_size - config.elite_k)

    def produce(slot: int) -> Member:
        return _produce_slot(slot, elite, evaluate, config, allowed, key)

    workers = _worker_count(len(slots))
    if workers == 1 or len(slots) < 8:
        children = [produce(s) for s in slots]
    else:
        with ThreadPoolExecutor(max_workers=workers) as tp:
            children = list(tp.map(produce, slots))

    next_pop = Population(
        members=list(elite) + children,
        generation_index=pop.generation_index + 1,
    )
    return next_pop, record


def evolve(pool: Sequence[CrystalStructure],
           evaluate: Callable[[CrystalStructure], tuple[PropertyVector, float]],
           config: EvolutionConfig,
           stream_prefix: tuple[int, ...] = (),
           ) -> tuple[Population, list[GenerationRecord]]:
    """Seed from the pool and run the configured number of generations.

    Returns the final population and one record per generation including the
    final one (generations + 1 records in total).
    """
    pop = seed_population(pool, evaluate, config)
    records: list[GenerationRecord] = []
    for gen in range(config.generations):
        pop, record = step_generation(pop, evaluate, config, stream_prefix + (gen,))
        records.append(record)
    records.append(population_record(pop, config.elite_k))
    return pop, records
