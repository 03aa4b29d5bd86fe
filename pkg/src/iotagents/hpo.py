"""Island-model genetic search over binary-encoded integer hyperparameters.

Subpopulations evolve independently between migration barriers; each island
draws from its own seed stream so results do not depend on worker count.
Fitness is minimized (validation RMSE when tuning the forecaster).
"""

from __future__ import annotations

import json
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np


class FitnessError(RuntimeError):
    """Raised when a fitness evaluation fails; carries the chromosome."""

    def __init__(self, chromosome: "Chromosome", cause: Exception):
        super().__init__(f"fitness evaluation failed for {chromosome.bits}: {cause}")
        self.chromosome = chromosome
        self.cause = cause


@dataclass(frozen=True)
class GeneSpec:
    name: str
    low: int
    high: int

    def __post_init__(self):
        if self.high < self.low or self.low < 1:
            raise ValueError(f"gene {self.name} needs 1 <= low <= high")

    @property
    def n_bits(self) -> int:
        return math.ceil(math.log2(self.high - self.low + 1)) if self.high > self.low else 0

    def encode(self, value: int) -> str:
        if not self.low <= value <= self.high:
            raise ValueError(f"{self.name}={value} outside [{self.low}, {self.high}]")
        return format(value - self.low, f"0{self.n_bits}b") if self.n_bits else ""

    def decode(self, bits: str) -> int:
        raw = self.low + (int(bits, 2) if bits else 0)
        return min(max(raw, self.low), self.high)


@dataclass(frozen=True)
class Chromosome:
    bits: str
    decoded: dict

    def __hash__(self):
        return hash(self.bits)

    def __eq__(self, other):
        return isinstance(other, Chromosome) and self.bits == other.bits


class ParamCodec:
    """Plain binary codec over an ordered set of integer genes."""

    def __init__(self, genes: list[GeneSpec]):
        if not genes:
            raise ValueError("at least one gene required")
        self.genes = list(genes)
        self.names = [g.name for g in genes]
        self.total_bits = sum(g.n_bits for g in genes)

    def encode(self, params: dict) -> Chromosome:
        unknown = set(params) - set(self.names)
        if unknown:
            raise KeyError(f"unknown hyperparameters: {sorted(unknown)}")
        bits = "".join(g.encode(params[g.name]) for g in self.genes)
        return Chromosome(bits=bits, decoded=self.decode_bits(bits))

    def decode_bits(self, bits: str) -> dict:
        if len(bits) != self.total_bits:
            raise ValueError(f"expected {self.total_bits} bits, got {len(bits)}")
        out = {}
        pos = 0
        for gene in self.genes:
            out[gene.name] = gene.decode(bits[pos : pos + gene.n_bits])
            pos += gene.n_bits
        return out

    def chromosome(self, bits: str) -> Chromosome:
        return Chromosome(bits=bits, decoded=self.decode_bits(bits))

    def random(self, rng: np.random.Generator) -> Chromosome:
        bits = "".join("1" if rng.random() < 0.5 else "0" for _ in range(self.total_bits))
        return self.chromosome(bits)


def default_codec() -> ParamCodec:
    # Single hidden-unit gene mirroring the reference tuning setup.
    return ParamCodec([GeneSpec("hidden_units", 1, 512)])


@dataclass
class PgaConfig:
    population: int = 12
    islands: int = 2
    outer_iterations: int = 10   # migration rounds
    inner_iterations: int = 10   # generations between migrations
    tournament_size: int = 3
    crossover_prob: float = 0.9
    mutation_prob: float | None = None  # default 1/bit-length
    migration_fraction: float = 0.2     # of island size, floor 1
    seed: int = 0
    workers: int | None = None          # defaults to islands
    use_cache: bool = True

    def __post_init__(self):
        if self.population < 1 or self.islands < 1:
            raise ValueError("population and islands must be >= 1")
        if self.population % self.islands != 0:
            raise ValueError("population must divide evenly across islands")
        if self.outer_iterations < 0 or self.inner_iterations < 0:
            raise ValueError("iteration counts must be >= 0")
        if self.tournament_size < 1:
            raise ValueError("tournament size must be >= 1")

    @property
    def island_size(self) -> int:
        return self.population // self.islands


@dataclass(frozen=True)
class FitnessRecord:
    chromosome: Chromosome
    fitness: float
    cost_s: float = 0.0

    def __post_init__(self):
        if self.fitness < 0:
            raise ValueError("fitness must be nonnegative")


@dataclass
class TraceEntry:
    round: int
    generation: int
    island: int
    best_fitness: float
    best_params: dict

    def as_dict(self) -> dict:
        return {
            "round": self.round,
            "generation": self.generation,
            "island": self.island,
            "best_fitness": self.best_fitness,
            "best_params": self.best_params,
        }


@dataclass
class PgaResult:
    best: FitnessRecord
    trace: list = field(default_factory=list)
    evaluations: int = 0


def tournament_select(pop: list[FitnessRecord], k: int, rng: np.random.Generator) -> Chromosome:
    """Best of k entrants drawn uniformly without replacement."""
    if not pop:
        raise ValueError("empty population")
    if k > len(pop):
        raise ValueError("tournament size exceeds population")
    entrants = rng.choice(len(pop), size=k, replace=False)
    best = min(entrants, key=lambda i: (pop[i].fitness, i))
    return pop[best].chromosome


def vary(parents: tuple, cfg: PgaConfig, rng: np.random.Generator,
         codec: ParamCodec) -> tuple:
    """Uniform crossover followed by independent per-bit flips."""
    a, b = parents
    if len(a.bits) != len(b.bits):
        raise ValueError("parent bit lengths differ")
    bits_a, bits_b = list(a.bits), list(b.bits)
    if rng.random() < cfg.crossover_prob:
        for i in range(len(bits_a)):
            if rng.random() < 0.5:
                bits_a[i], bits_b[i] = bits_b[i], bits_a[i]
    mut = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / max(len(bits_a), 1)
    for bits in (bits_a, bits_b):
        for i in range(len(bits)):
            if rng.random() < mut:
                bits[i] = "1" if bits[i] == "0" else "0"
    return codec.chromosome("".join(bits_a)), codec.chromosome("".join(bits_b))


class _Evaluator:
    """Thread-safe fitness evaluation with optional memoization."""

    def __init__(self, fitness_fn, use_cache: bool):
        self.fitness_fn = fitness_fn
        self.use_cache = use_cache
        self._cache: dict[str, float] = {}
        self._lock = threading.Lock()
        self.evaluations = 0

    def __call__(self, chromosome: Chromosome) -> FitnessRecord:
        if self.use_cache:
            with self._lock:
                hit = self._cache.get(chromosome.bits)
            if hit is not None:
                return FitnessRecord(chromosome, hit)
        start = time.perf_counter()
        try:
            value = float(self.fitness_fn(chromosome.decoded))
        except Exception as exc:  # surface the offending chromosome
            raise FitnessError(chromosome, exc) from exc
        cost = time.perf_counter() - start
        with self._lock:
            self.evaluations += 1
            if self.use_cache:
                self._cache[chromosome.bits] = value
        return FitnessRecord(chromosome, value, cost)


def evolve_subpopulation(
    subpop: list[FitnessRecord],
    fitness_fn,
    generations: int,
    cfg: PgaConfig,
    rng: np.random.Generator,
    codec: ParamCodec,
    on_generation=None,
) -> list[FitnessRecord]:
    """Evaluate -> select -> vary -> keep the island's best `n` survivors.

    Truncating the parent+offspring pool preserves size and makes the
    island's best fitness weakly decreasing across generations.
    """
    if not subpop:
        raise ValueError("empty subpopulation")
    evaluator = fitness_fn if isinstance(fitness_fn, _Evaluator) else _Evaluator(fitness_fn, cfg.use_cache)
    pop = list(subpop)
    n = len(pop)
    for gen in range(generations):
        offspring: list[FitnessRecord] = []
        while len(offspring) < n:
            parents = (
                tournament_select(pop, min(cfg.tournament_size, n), rng),
                tournament_select(pop, min(cfg.tournament_size, n), rng),
            )
            for child in vary(parents, cfg, rng, codec):
                if len(offspring) < n:
                    offspring.append(evaluator(child))
        pool = pop + offspring
        pool.sort(key=lambda r: r.fitness)
        # Prefer distinct genotypes among survivors: duplicates starve
        # crossover of material to recombine across Hamming cliffs.
        survivors, seen = [], set()
        for record in pool:
            if record.chromosome.bits not in seen:
                survivors.append(record)
                seen.add(record.chromosome.bits)
            if len(survivors) == n:
                break
        for record in pool:
            if len(survivors) == n:
                break
            if record.chromosome.bits in seen:
                survivors.append(record)
        pop = survivors
        if on_generation is not None:
            on_generation(gen, pop)
    return pop


def migrate(subpops: list, cfg: PgaConfig, rng: np.random.Generator) -> list:
    """Ring exchange: each island's best members replace the next one's worst."""
    n_islands = len(subpops)
    if n_islands < 1:
        raise ValueError("at least one subpopulation required")
    if n_islands == 1:
        return [list(p) for p in subpops]
    count = max(1, int(cfg.migration_fraction * len(subpops[0])))
    outgoing = []
    for pop in subpops:
        ranked = sorted(pop, key=lambda r: r.fitness)
        outgoing.append(ranked[:count])
    result = []
    for idx, pop in enumerate(subpops):
        incoming = outgoing[(idx - 1) % n_islands]
        ranked = sorted(pop, key=lambda r: r.fitness)
        kept = ranked[: len(pop) - len(incoming)]
        result.append(kept + list(incoming))
    return result


def run_pga(cfg: PgaConfig, fitness_fn, codec: ParamCodec | None = None) -> PgaResult:
    """Concurrent island evolution with ring migration between rounds.

    Returns the argmin over every chromosome ever evaluated plus a
    per-generation trace of island bests.
    """
    codec = codec or default_codec()
    evaluator = _Evaluator(fitness_fn, cfg.use_cache)
    seed_seq = np.random.SeedSequence(cfg.seed)
    island_rngs = [np.random.default_rng(s) for s in seed_seq.spawn(cfg.islands)]

    init_rng = np.random.default_rng(seed_seq.spawn(1)[0])
    chromosomes = [codec.random(init_rng) for _ in range(cfg.population)]
    workers = cfg.workers or cfg.islands
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            initial = list(pool.map(evaluator, chromosomes))
    else:
        initial = [evaluator(c) for c in chromosomes]
    islands = [
        initial[i * cfg.island_size : (i + 1) * cfg.island_size]
        for i in range(cfg.islands)
    ]

    archive_lock = threading.Lock()
    best_ever: list[FitnessRecord] = [min(
        (r for pop in islands for r in pop),
        key=lambda r: (r.fitness, r.chromosome.bits),
    )]
    trace: list[TraceEntry] = []

    def consider(record: FitnessRecord) -> None:
        # Lexicographic tie-break keeps the winner independent of the
        # order worker threads report in.
        with archive_lock:
            cur = best_ever[0]
            if (record.fitness, record.chromosome.bits) < (cur.fitness, cur.chromosome.bits):
                best_ever[0] = record

    def run_island(idx: int, rnd: int):
        local_trace: list[TraceEntry] = []

        def on_generation(gen, pop):
            best = min(pop, key=lambda r: r.fitness)
            consider(best)
            local_trace.append(
                TraceEntry(
                    round=rnd,
                    generation=gen,
                    island=idx,
                    best_fitness=best.fitness,
                    best_params=dict(best.chromosome.decoded),
                )
            )

        evolved = evolve_subpopulation(
            islands[idx], evaluator, cfg.inner_iterations, cfg,
            island_rngs[idx], codec, on_generation,
        )
        return evolved, local_trace

    for rnd in range(cfg.outer_iterations):
        if workers > 1 and cfg.islands > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(run_island, i, rnd) for i in range(cfg.islands)]
                outcomes = [f.result() for f in futures]
        else:
            outcomes = [run_island(i, rnd) for i in range(cfg.islands)]
        islands = [out[0] for out in outcomes]
        for _, local in outcomes:  # fixed island order keeps the trace stable
            trace.extend(local)
        migration_rng = np.random.default_rng(seed_seq.spawn(1)[0])
        islands = migrate(islands, cfg, migration_rng)
        for pop in islands:
            for record in pop:
                consider(record)

    return PgaResult(best=best_ever[0], trace=trace, evaluations=evaluator.evaluations)


def write_trace(trace: list, path) -> None:
    """Line-delimited JSON trace records."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in trace:
            fh.write(json.dumps(entry.as_dict(), sort_keys=True) + "\n")


def read_trace(path) -> list:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                data = json.loads(line)
                entries.append(TraceEntry(**data))
    return entries
