"""Experiment harness: population-size sweeps, CSV reports and weight heatmaps.

A sweep runs a fixed number of seeded EDA runs per population size (in
ascending order) and reports, per size, the success count and the mean and
sample standard deviation of unique evaluations and wall time over the
successful runs. The minimal sizes that solve at least 50% and 90% of the
runs are the headline numbers.
"""

from __future__ import annotations

import configparser
import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .dbm import DbmParams
from .eda import DbmSettings, EdaConfig, run_eda
from .errors import ConfigError, ParseError
from .problems import load_nk_instance, make_problem
from .rbm import TrainConfig

log = logging.getLogger(__name__)

DEFAULT_GRID = (100, 200, 300, 400, 500, 1000, 1500) + tuple(range(2000, 16001, 1000))

SUMMARY_FIELDS = [
    "problem", "popsize", "runs", "successes",
    "mean_unique_evals", "std_unique_evals", "mean_wall_s", "std_wall_s",
]
RUN_LOG_FIELDS = ["problem", "popsize", "seed", "solved", "best_fitness", "generations", "unique_evals", "wall_s"]


def success_threshold(runs, fraction):
    """Successes needed for ``fraction`` of ``runs`` (10 and 18 of 20)."""
    return math.ceil(round(fraction * runs, 9))


@dataclass
class RunRecord:
    problem: str
    popsize: int
    seed: int
    solved: bool
    best_fitness: float
    generations: int
    unique_evals: int
    wall_s: float


@dataclass
class SizeSummary:
    problem: str
    popsize: int
    runs: int
    successes: int
    mean_unique_evals: float | None
    std_unique_evals: float | None
    mean_wall_s: float | None
    std_wall_s: float | None


def _mean_std(values):
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), (float(arr.std(ddof=1)) if len(arr) > 1 else None)


def summarize_size(records, problem, popsize, runs=None):
    """Aggregate the run records of one population size."""
    ok = [r for r in records if r.solved]
    mean_e, std_e = _mean_std([r.unique_evals for r in ok])
    mean_t, std_t = _mean_std([r.wall_s for r in ok])
    return SizeSummary(problem, popsize, len(records) if runs is None else runs, len(ok), mean_e, std_e, mean_t, std_t)


@dataclass
class SweepSummary:
    rows: list = field(default_factory=list)
    runs: list = field(default_factory=list)
    runs_per_size: int = 20

    def min_size(self, fraction):
        need = success_threshold(self.runs_per_size, fraction)
        for row in self.rows:
            if row.successes >= need:
                return row.popsize
        return None

    @property
    def min_size_50(self):
        return self.min_size(0.5)

    @property
    def min_size_90(self):
        return self.min_size(0.9)

    def row_for(self, popsize):
        return next((r for r in self.rows if r.popsize == popsize), None)


@dataclass
class SweepSpec:
    problem: object
    eda: EdaConfig
    grid: tuple = DEFAULT_GRID
    runs_per_size: int = 20
    base_seed: int = 0
    early_stop: bool = True

    def __post_init__(self):
        self.grid = tuple(int(g) for g in self.grid)
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("population grid must be strictly increasing")
        if self.runs_per_size < 1:
            raise ConfigError("runs_per_size must be >= 1")

    def seed_for(self, size_index, run_index):
        return self.base_seed + size_index * self.runs_per_size + run_index


def _run_one(problem, cfg):
    result = run_eda(problem, cfg)
    return RunRecord(
        problem.label, cfg.population_size, cfg.seed, bool(result.solved),
        float(result.best_fitness), int(result.generations_used),
        int(result.unique_evaluations), float(result.wall_time),
    )


def run_sweep(spec, jobs=1, progress=None):
    """Execute a population-size sweep.

    Sizes are visited in ascending order. With ``spec.early_stop`` the sweep
    ends after the first size reaching the 90% success threshold. Runs of one
    size execute on ``jobs`` worker processes and are merged by run index, so
    every field except wall time is independent of ``jobs``.
    """
    summary = SweepSummary(runs_per_size=spec.runs_per_size)
    need90 = success_threshold(spec.runs_per_size, 0.9)
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for si, size in enumerate(spec.grid):
            configs = [
                replace(spec.eda, population_size=size, seed=spec.seed_for(si, ri))
                for ri in range(spec.runs_per_size)
            ]
            if pool is None:
                records = [_run_one(spec.problem, c) for c in configs]
            else:
                records = list(pool.map(_run_one, [spec.problem] * len(configs), configs))
            summary.runs.extend(records)
            row = summarize_size(records, spec.problem.label, size)
            summary.rows.append(row)
            log.info("popsize %d: %d/%d solved", size, row.successes, row.runs)
            if progress is not None:
                progress(row)
            if spec.early_stop and row.successes >= need90:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return summary


def table_report(rows, runs_per_size=None):
    """Headline results at the minimal 50% and 90% population sizes.

    Works from summary rows alone (for example as read back from the summary
    CSV). Returns ``{"50": row_or_None, "90": row_or_None}``.
    """
    rows = sorted(rows, key=lambda r: r.popsize)
    out = {}
    for key, frac in (("50", 0.5), ("90", 0.9)):
        out[key] = next(
            (r for r in rows if r.successes >= success_threshold(runs_per_size or r.runs, frac)), None
        )
    return out


# --- CSV --------------------------------------------------------------------

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(getattr(row, name)) for name in header])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def export_results_csv(summary, path):
    """One row per population size in the summary CSV schema."""
    rows = summary.rows if isinstance(summary, SweepSummary) else summary
    _write_csv(path, SUMMARY_FIELDS, rows)


def export_run_log_csv(runs, path):
    """One row per run in the run-log CSV schema."""
    runs = runs.runs if isinstance(runs, SweepSummary) else runs
    _write_csv(path, RUN_LOG_FIELDS, runs)


def _read_csv(path, header):
    path = str(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise ParseError("empty CSV file", 1, path) from None
        if first != header:
            raise ParseError(f"unexpected header {first}", 1, path)
        return [(reader.line_num, row) for row in reader]


def _opt_float(s):
    return None if s == "" else float(s)


def read_results_csv(path):
    out = []
    for no, row in _read_csv(path, SUMMARY_FIELDS):
        try:
            out.append(SizeSummary(row[0], int(row[1]), int(row[2]), int(row[3]), *map(_opt_float, row[4:8])))
        except (ValueError, IndexError):
            raise ParseError("malformed summary row", no, str(path)) from None
    return out


def read_run_log_csv(path):
    out = []
    for no, row in _read_csv(path, RUN_LOG_FIELDS):
        try:
            out.append(RunRecord(
                row[0], int(row[1]), int(row[2]), row[3] == "1", float(row[4]),
                int(row[5]), int(row[6]), float(row[7]),
            ))
        except (ValueError, IndexError):
            raise ParseError("malformed run-log row", no, str(path)) from None
    return out


# --- weight heatmap ---------------------------------------------------------

def heatmap_pixels(W1, maxval=255):
    """Map weights to gray levels: -max|w| black, 0 mid-gray, +max|w| white.

    Rows are hidden-1 neurons and columns visible variables, i.e. ``W1.T``.
    """
    W = np.asarray(W1, dtype=float).T
    scale = np.abs(W).max() if W.size else 0.0
    if scale == 0:
        return np.full(W.shape, int(np.rint(maxval / 2)), dtype=int)
    return np.rint((W / scale + 1.0) * maxval / 2).astype(int)


def export_weight_heatmap(params, path):
    """Write W1 as a plain-text (P2) graymap."""
    W1 = params.W1 if isinstance(params, DbmParams) else params
    pix = heatmap_pixels(W1)
    h, w = pix.shape
    lines = ["P2", f"{w} {h}", "255"] + [" ".join(map(str, r)) for r in pix]
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def read_pgm(path):
    """Read a plain-text graymap into an integer array (rows x columns)."""
    tokens = []
    with open(path) as fh:
        for line in fh:
            tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise ParseError("not a plain-text PGM (missing P2 magic)", 1, str(path))
    w, h, _ = (int(t) for t in tokens[1:4])
    data = np.array(tokens[4:], dtype=int)
    if data.size != w * h:
        raise ParseError(f"expected {w * h} pixels, found {data.size}", None, str(path))
    return data.reshape(h, w)


def block_alignment_fraction(W1, block=5, top=5):
    """Fraction of hidden-1 neurons whose ``top`` strongest weights share one block.

    Blocks are the aligned runs ``[0, block), [block, 2*block), ...`` of
    visible variables.
    """
    W = np.abs(np.asarray(W1, dtype=float)).T
    strongest = np.argsort(-W, axis=1, kind="stable")[:, :top]
    blocks = strongest // block
    return float(np.mean(np.all(blocks == blocks[:, :1], axis=1)))


# --- configuration ----------------------------------------------------------

@dataclass
class Settings:
    """Every tunable of a run or sweep, as read from a flat config file."""

    problem: str = "onemax"
    n: int = 50
    k: int = 5
    nk_seed: int = 0
    nk_file: str = ""
    model: str = "dbm"
    popsize: int = 100
    seed: int = 0
    grid: str = ",".join(map(str, DEFAULT_GRID))
    runs: int = 20
    jobs: int = 1
    early_stop: bool = True
    max_generations: int = 150
    stagnation_limit: int = 50
    m1: int = 0
    m2: int = 0
    pretrain_learning_rate: float = 0.1
    pretrain_epochs: int = 50
    pretrain_batch_size: int = 100
    pretrain_cd_steps: int = 1
    pretrain_momentum: float = 0.5
    pretrain_final_momentum: float = 0.9
    pretrain_momentum_switch_epoch: int = 5
    pretrain_weight_decay: float = 0.0002
    finetune_learning_rate: float = 0.05
    finetune_epochs: int = 30
    finetune_batch_size: int = 100
    finetune_momentum: float = 0.5
    finetune_final_momentum: float = 0.5
    finetune_momentum_switch_epoch: int = 5
    finetune_weight_decay: float = 0.0002
    mf_iterations: int = 10
    gibbs_steps: int = 5
    sample_iterations: int = 25

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name: f for f in fields(cls)}
        values = {}
        for key, raw in mapping.items():
            key = key.strip().replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown setting {key!r}")
            values[key] = _coerce(key, raw, type(getattr(cls, key)))
        return cls(**values)

    def updated(self, **overrides):
        clean = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **clean)

    def dump(self):
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def grid_sizes(self):
        try:
            return tuple(int(x) for x in str(self.grid).split(",") if x.strip())
        except ValueError:
            raise ConfigError(f"grid must be comma-separated integers, got {self.grid!r}") from None

    def make_problem(self):
        if self.problem == "nk" and self.nk_file:
            return make_problem("nk", self.n, nk=load_nk_instance(self.nk_file))
        return make_problem(self.problem, self.n, k=self.k, seed=self.nk_seed)

    def dbm_settings(self):
        def train_cfg(prefix):
            return TrainConfig(
                learning_rate=getattr(self, f"{prefix}_learning_rate"),
                epochs=getattr(self, f"{prefix}_epochs"),
                batch_size=getattr(self, f"{prefix}_batch_size"),
                momentum=getattr(self, f"{prefix}_momentum"),
                final_momentum=getattr(self, f"{prefix}_final_momentum"),
                momentum_switch_epoch=getattr(self, f"{prefix}_momentum_switch_epoch"),
                weight_decay=getattr(self, f"{prefix}_weight_decay"),
                cd_steps=self.pretrain_cd_steps,
            )

        return DbmSettings(
            m1=self.m1 or None,
            m2=self.m2 or None,
            pretrain=train_cfg("pretrain"),
            finetune=train_cfg("finetune"),
            mf_iterations=self.mf_iterations,
            gibbs_steps=self.gibbs_steps,
            sample_iterations=self.sample_iterations,
        )

    def eda_config(self):
        return EdaConfig(
            population_size=self.popsize,
            max_generations=self.max_generations,
            stagnation_limit=self.stagnation_limit,
            seed=self.seed,
            model=self.model,
            dbm=self.dbm_settings(),
        )

    def sweep_spec(self):
        return SweepSpec(
            problem=self.make_problem(),
            eda=self.eda_config(),
            grid=self.grid_sizes(),
            runs_per_size=self.runs,
            base_seed=self.seed,
            early_stop=self.early_stop,
        )


def _coerce(key, raw, typ):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        return typ(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for setting {key!r}") from None


def load_config(path):
    """Read a flat ``key = value`` file (``#`` comments allowed)."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        parser.read_string("[settings]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    return Settings.from_mapping(dict(parser["settings"]))
