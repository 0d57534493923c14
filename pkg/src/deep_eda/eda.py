"""Generational estimation-of-distribution loop.

Each generation selects parents by binary tournaments, XOR-encodes them with
a per-run random mask, fits a probabilistic model, samples as many candidates
as there are parents, decodes them and forms the next population from
parents plus candidates. Two model backends are available: the two-layer DBM
and a univariate marginal (UMDA) baseline.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .dbm import FantasyParticles, NetworkShape, finetune, pretrain, sample_population
from .errors import ConfigError, ShapeError, TrainingDivergenceError
from .problems import as_genomes
from .rbm import TrainConfig

log = logging.getLogger(__name__)

MODEL_BACKENDS = ("dbm", "umda")


@dataclass
class Population:
    genomes: np.ndarray
    fitness: np.ndarray

    def __post_init__(self):
        self.genomes = as_genomes(np.atleast_2d(self.genomes))
        self.fitness = np.asarray(self.fitness, dtype=float)
        if len(self.fitness) != len(self.genomes):
            raise ShapeError("fitness vector and genome matrix differ in length")

    @property
    def size(self):
        return len(self.genomes)

    def best(self):
        j = int(np.argmax(self.fitness))
        return self.genomes[j], float(self.fitness[j])


@dataclass
class XorMask:
    """Per-run bit mask applied before model fitting and after sampling.

    One random row of length ``n`` is drawn per run and shared by every
    population slot, so each bit column is either kept or flipped for the
    whole run.
    """

    bits: np.ndarray

    def __post_init__(self):
        self.bits = as_genomes(self.bits)
        if self.bits.ndim != 1:
            raise ShapeError("mask must be a single row of bits")

    @classmethod
    def random(cls, n, rng):
        return cls(rng.integers(0, 2, n, dtype=np.uint8))

    @classmethod
    def identity(cls, n):
        return cls(np.zeros(n, dtype=np.uint8))


def apply_mask(batch, mask):
    """XOR every row of ``batch`` with the mask; applying it twice is a no-op."""
    bits = mask.bits if isinstance(mask, XorMask) else as_genomes(mask)
    arr = as_genomes(batch)
    if arr.shape[-1] != bits.shape[-1] or (bits.ndim == 2 and bits.shape[0] < len(arr)):
        raise ShapeError(f"mask shape {bits.shape} does not fit batch shape {arr.shape}")
    if bits.ndim == 2:
        bits = bits[: len(arr)]
    return arr ^ bits


def tournament_select(pop, rng):
    """Binary tournaments without replacement.

    The population is shuffled into disjoint pairs and the fitter member of
    each pair wins (ties go to a fair coin), giving ``pop.size // 2`` parents.
    """
    if pop.size % 2:
        raise ConfigError(f"tournament pairing needs an even population, got {pop.size}")
    order = rng.permutation(pop.size)
    a, b = order[0::2], order[1::2]
    fa, fb = pop.fitness[a], pop.fitness[b]
    coin = rng.random(len(a)) < 0.5
    winners = np.where(fa > fb, a, np.where(fb > fa, b, np.where(coin, a, b)))
    return Population(pop.genomes[winners], pop.fitness[winners])


def umda_fit(parents):
    """Per-bit frequencies of ones, clamped to ``[1/n, 1 - 1/n]``."""
    parents = as_genomes(np.atleast_2d(parents))
    n = parents.shape[1]
    return np.clip(parents.mean(axis=0), 1.0 / n, 1.0 - 1.0 / n)


def umda_sample(marginals, count, rng):
    marginals = np.asarray(marginals, dtype=float)
    return (rng.random((count, marginals.size)) < marginals).astype(np.uint8)


class EvaluationCache:
    """Memoizes fitness by exact genome so duplicates are never re-evaluated."""

    def __init__(self, fitness_fn):
        self._fn = fitness_fn
        self._seen = {}
        self.submissions = 0

    def evaluate(self, genomes):
        genomes = as_genomes(np.atleast_2d(genomes))
        keys = [row.tobytes() for row in np.packbits(genomes, axis=1)]
        self.submissions += len(keys)
        fresh = {}
        for i, key in enumerate(keys):
            if key not in self._seen and key not in fresh:
                fresh[key] = i
        if fresh:
            idx = list(fresh.values())
            values = np.atleast_1d(self._fn(genomes[idx]))
            self._seen.update(zip(fresh.keys(), values.tolist()))
        return np.array([self._seen[key] for key in keys])

    @property
    def unique_count(self):
        return len(self._seen)


def unique_evaluation_count(cache):
    """Number of distinct genomes submitted to ``cache`` so far."""
    return cache.unique_count


@dataclass(frozen=True)
class DbmSettings:
    """Model-building settings of the DBM backend.

    ``m1``/``m2`` default to ``n`` and ``ceil(n/2)``.
    """

    m1: int | None = None
    m2: int | None = None
    pretrain: TrainConfig = field(default_factory=TrainConfig)
    finetune: TrainConfig = field(default_factory=lambda: TrainConfig(learning_rate=0.05, epochs=30, final_momentum=0.5))
    mf_iterations: int = 10
    gibbs_steps: int = 5
    sample_iterations: int = 25


@dataclass(frozen=True)
class EdaConfig:
    population_size: int
    max_generations: int = 150
    stagnation_limit: int = 50
    tournament_size: int = 2
    seed: int = 0
    model: str = "dbm"
    dbm: DbmSettings = field(default_factory=DbmSettings)

    def __post_init__(self):
        if self.population_size < 4 or self.population_size % 2:
            raise ConfigError(f"population_size must be even and >= 4, got {self.population_size}")
        if self.max_generations < 1 or self.stagnation_limit < 1:
            raise ConfigError("generation and stagnation limits must be >= 1")
        if self.tournament_size != 2:
            raise ConfigError("only binary tournaments are supported")
        if self.model not in MODEL_BACKENDS:
            raise ConfigError(f"unknown model backend {self.model!r}; choose from {MODEL_BACKENDS}")


@dataclass
class RunResult:
    solved: bool
    best_fitness: float
    generations_used: int
    unique_evaluations: int
    wall_time: float = field(default=0.0, compare=False)
    best_history: list = field(default_factory=list)
    failed: bool = False
    error: str | None = None


class UmdaModel:
    """Independent-bit baseline: fit marginals, sample Bernoulli rows."""

    name = "umda"

    def __call__(self, training, count, rng):
        return umda_sample(umda_fit(training), count, rng)


class DbmModel:
    """DBM backend, retrained from scratch for every generation.

    The most recent trained parameters are kept in ``last_params``.
    """

    name = "dbm"

    def __init__(self, settings=None):
        self.settings = settings or DbmSettings()
        self.last_params = None

    def fit(self, training, rng):
        s = self.settings
        training = np.asarray(training, dtype=float)
        shape = NetworkShape.default_for(training.shape[1], s.m1, s.m2)
        seeds = rng.integers(2**63, size=3)
        params = pretrain(training, shape, s.pretrain.with_seed(seeds[0]), s.pretrain.with_seed(seeds[1]))
        ft_rng = np.random.default_rng(seeds[2])
        particles = FantasyParticles.random(min(s.finetune.batch_size, len(training)), shape, ft_rng)
        params, _ = finetune(training, params, s.finetune, particles, s.mf_iterations, s.gibbs_steps, ft_rng)
        self.last_params = params
        return params

    def __call__(self, training, count, rng):
        params = self.fit(training, rng)
        init = np.resize(np.asarray(training), (count, training.shape[1]))
        return sample_population(params, init, self.settings.sample_iterations, rng).astype(np.uint8)


def make_model(cfg):
    return DbmModel(cfg.dbm) if cfg.model == "dbm" else UmdaModel()


def run_eda(problem, cfg, model=None, mask=None, on_generation=None):
    """Run one EDA until the optimum, the generation cap or stagnation.

    Parameters
    ----------
    problem : ProblemInstance
    cfg : EdaConfig
    model : callable, optional
        ``model(training, count, rng) -> samples``; built from ``cfg.model``
        when omitted.
    mask : XorMask, optional
        Overrides the random per-run mask.
    on_generation : callable, optional
        Called as ``on_generation(generation, population, model)`` after each
        generation's population update.

    Returns
    -------
    RunResult
        Training divergence ends the run with ``failed=True`` instead of
        raising.
    """
    start = time.perf_counter()
    model = make_model(cfg) if model is None else model
    init_rng, mask_rng, sel_rng, model_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(4)
    )
    n = problem.n
    if mask is None:
        mask = XorMask.random(n, mask_rng)
    cache = EvaluationCache(problem.evaluate)

    genomes = init_rng.integers(0, 2, (cfg.population_size, n), dtype=np.uint8)
    pop = Population(genomes, cache.evaluate(genomes))
    best = pop.best()[1]
    history = [best]
    generation = stagnation = 0
    failed, error = False, None

    while best < problem.optimum_fitness and generation < cfg.max_generations:
        generation += 1
        parents = tournament_select(pop, sel_rng)
        n_candidates = cfg.population_size - parents.size
        try:
            samples = model(apply_mask(parents.genomes, mask), n_candidates, model_rng)
        except TrainingDivergenceError as exc:
            failed, error = True, f"generation {generation}: {exc}"
            log.warning("run with seed %s failed: %s", cfg.seed, error)
            break
        candidates = apply_mask(samples, mask)
        pop = Population(
            np.concatenate([parents.genomes, candidates]),
            np.concatenate([parents.fitness, cache.evaluate(candidates)]),
        )
        gen_best = pop.best()[1]
        if gen_best > best:
            best, stagnation = gen_best, 0
        else:
            stagnation += 1
        history.append(best)
        if on_generation is not None:
            on_generation(generation, pop, model)
        if stagnation >= cfg.stagnation_limit:
            break

    return RunResult(
        solved=best >= problem.optimum_fitness,
        best_fitness=best,
        generations_used=generation,
        unique_evaluations=cache.unique_count,
        wall_time=time.perf_counter() - start,
        best_history=history,
        failed=failed,
        error=error,
    )
