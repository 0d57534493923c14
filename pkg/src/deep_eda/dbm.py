"""Deep Boltzmann machine with two binary hidden layers.

The joint energy of a state ``(v, h1, h2)`` is::

    E = -v W1 h1 - h1 W2 h2 - b.v - c1.h1 - c2.h2

Training follows the usual two-stage recipe: greedy pretraining of two
stacked RBMs, then fine-tuning of the whole model with mean-field positive
statistics and a persistent Gibbs chain ("fantasy particles") for the
negative statistics. Exhaustive enumeration utilities compute exact
probabilities for tiny models and serve as test oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, EnumerationLimitError, ParseError, ShapeError, TrainingDivergenceError
from .rbm import (
    bernoulli,
    hidden_probs,
    parse_header,
    read_float_rows,
    sigmoid,
    train_rbm,
)

# Upper bound on n + m1 + m2 for exhaustive enumeration.
MAX_ENUMERATION_UNITS = 20

# Weight scale factors active during greedy pretraining only. Each DBM hidden
# layer sees input from two neighbors, so the bottom RBM doubles its upward
# input and the top RBM doubles its downward input.
RBM1_SCALES = (2.0, 1.0)
RBM2_SCALES = (1.0, 2.0)


@dataclass(frozen=True)
class NetworkShape:
    n: int
    m1: int
    m2: int

    def __post_init__(self):
        if min(self.n, self.m1, self.m2) < 1:
            raise ConfigError(f"all layer sizes must be >= 1, got {self}")

    @classmethod
    def default_for(cls, n, m1=None, m2=None):
        """``m1 = n`` and ``m2 = ceil(n / 2)`` unless given."""
        return cls(n, n if m1 is None else m1, math.ceil(n / 2) if m2 is None else m2)

    @property
    def units(self):
        return self.n + self.m1 + self.m2


@dataclass
class DbmParams:
    W1: np.ndarray
    W2: np.ndarray
    b: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    def __post_init__(self):
        self.W1 = np.atleast_2d(np.asarray(self.W1, dtype=float))
        self.W2 = np.atleast_2d(np.asarray(self.W2, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.c1 = np.asarray(self.c1, dtype=float).reshape(-1)
        self.c2 = np.asarray(self.c2, dtype=float).reshape(-1)
        n, m1, m2 = self.b.size, self.c1.size, self.c2.size
        if self.W1.shape != (n, m1) or self.W2.shape != (m1, m2):
            raise ShapeError(
                f"inconsistent DBM shapes: W1 {self.W1.shape}, W2 {self.W2.shape}, biases {(n, m1, m2)}"
            )

    @property
    def shape(self):
        return NetworkShape(self.b.size, self.c1.size, self.c2.size)

    @classmethod
    def zeros(cls, shape):
        n, m1, m2 = shape.n, shape.m1, shape.m2
        return cls(np.zeros((n, m1)), np.zeros((m1, m2)), np.zeros(n), np.zeros(m1), np.zeros(m2))

    @classmethod
    def random(cls, shape, rng, scale=1.0, biases=True):
        """Gaussian parameters, mainly for tests on small models."""
        n, m1, m2 = shape.n, shape.m1, shape.m2
        bias_scale = scale if biases else 0.0
        return cls(
            rng.normal(0, scale, (n, m1)),
            rng.normal(0, scale, (m1, m2)),
            rng.normal(0, bias_scale, n),
            rng.normal(0, bias_scale, m1),
            rng.normal(0, bias_scale, m2),
        )

    def arrays(self):
        return (self.W1, self.W2, self.b, self.c1, self.c2)

    def copy(self):
        return DbmParams(*(a.copy() for a in self.arrays()))

    def scaled(self, s):
        return DbmParams(*(s * a for a in self.arrays()))

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def __eq__(self, other):
        if not isinstance(other, DbmParams):
            return NotImplemented
        return all(np.array_equal(x, y) for x, y in zip(self.arrays(), other.arrays()))


@dataclass
class FantasyParticles:
    """Persistent Gibbs chain states, one row per particle."""

    v: np.ndarray
    h1: np.ndarray
    h2: np.ndarray

    def __post_init__(self):
        if not len(self.v) == len(self.h1) == len(self.h2):
            raise ShapeError("particle layers must have equal row counts")

    @classmethod
    def random(cls, count, shape, rng):
        return cls(
            bernoulli(np.full((count, shape.n), 0.5), rng),
            bernoulli(np.full((count, shape.m1), 0.5), rng),
            bernoulli(np.full((count, shape.m2), 0.5), rng),
        )

    def __len__(self):
        return len(self.v)


@dataclass
class MeanFieldState:
    mu1: np.ndarray
    mu2: np.ndarray


def _batch(X, width, what):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != width:
        raise ShapeError(f"{what} has {X.shape[1]} columns, expected {width}")
    return X


def energy(v, h1, h2, p):
    """Energy of one state, or of each row when batches are given."""
    single = np.ndim(v) == 1
    v = _batch(v, p.b.size, "v")
    h1 = _batch(h1, p.c1.size, "h1")
    h2 = _batch(h2, p.c2.size, "h2")
    e = (
        -np.einsum("bi,ij,bj->b", v, p.W1, h1)
        - np.einsum("bj,jk,bk->b", h1, p.W2, h2)
        - v @ p.b
        - h1 @ p.c1
        - h2 @ p.c2
    )
    return float(e[0]) if single else e


def cond_h1(V, H2, p):
    """P(h1 = 1 | v, h2); inputs may be states or mean-field probabilities."""
    V = _batch(V, p.b.size, "visible batch")
    H2 = _batch(H2, p.c2.size, "h2 batch")
    if len(V) != len(H2):
        raise ShapeError("v and h2 batches differ in length")
    return sigmoid(V @ p.W1 + H2 @ p.W2.T + p.c1)


def cond_h2(H1, p):
    """P(h2 = 1 | h1)."""
    H1 = _batch(H1, p.c1.size, "h1 batch")
    return sigmoid(H1 @ p.W2 + p.c2)


def cond_v(H1, p):
    """P(v = 1 | h1)."""
    H1 = _batch(H1, p.c1.size, "h1 batch")
    return sigmoid(H1 @ p.W1.T + p.b)


# --- exhaustive enumeration -------------------------------------------------

def all_states(width):
    """Every binary vector of the given width; row ``i`` encodes ``i`` MSB first."""
    codes = np.arange(2**width)
    return ((codes[:, None] >> np.arange(width - 1, -1, -1)) & 1).astype(float)


def _check_enumerable(p):
    units = p.shape.units
    if units > MAX_ENUMERATION_UNITS:
        raise EnumerationLimitError(
            f"model has {units} units; exhaustive enumeration is limited to {MAX_ENUMERATION_UNITS}"
        )


def unnormalized_log_marginals(p):
    """log sum_{h1,h2} exp(-E(v, h1, h2)) for every visible state ``v``."""
    _check_enumerable(p)
    V = all_states(p.b.size)
    H1 = all_states(p.c1.size)
    H2 = all_states(p.c2.size)
    # inner[h1] = log sum_{h2} exp(h1 W2 h2 + c2 h2)
    inner = logsumexp(H1 @ p.W2 @ H2.T + H2 @ p.c2, axis=1)
    per_h1 = V @ p.W1 @ H1.T + H1 @ p.c1 + inner
    return logsumexp(per_h1, axis=1) + V @ p.b


def log_partition(p):
    """log Z by enumeration of all ``2**(n+m1+m2)`` states."""
    return float(logsumexp(unnormalized_log_marginals(p)))


def visible_distribution(p):
    """P(v) for all ``2**n`` visible states, indexed by their MSB-first code."""
    logm = unnormalized_log_marginals(p)
    return np.exp(logm - logsumexp(logm))


def state_codes(V):
    V = np.atleast_2d(np.asarray(V)).astype(np.int64)
    return V @ (1 << np.arange(V.shape[1] - 1, -1, -1))


def exact_visible_probability(v, p):
    """Exact P(v) for a single visible vector (tiny models only)."""
    v = _batch(v, p.b.size, "v")
    return float(visible_distribution(p)[state_codes(v)[0]])


def exact_log_likelihood(data, p):
    """Mean exact log P(v) over the rows of ``data`` (tiny models only)."""
    data = _batch(data, p.b.size, "data")
    logm = unnormalized_log_marginals(p)
    return float(np.mean(logm[state_codes(data)]) - logsumexp(logm))


# --- training ---------------------------------------------------------------

def pretrain(data, shape, cfg1, cfg2):
    """Greedy layer-wise initialization from two stacked RBMs.

    The bottom RBM is trained on ``data``; the top RBM is trained on binary
    samples of the bottom RBM's hidden activations. The first hidden layer
    keeps the bottom RBM's hidden biases; the top RBM's visible biases are
    dropped.
    """
    data = _batch(data, shape.n, "training data")
    up1, down1 = RBM1_SCALES
    up2, down2 = RBM2_SCALES
    rbm1 = train_rbm(data, (shape.n, shape.m1), cfg1, up1, down1)
    rng = np.random.default_rng(cfg2.seed)
    hidden = bernoulli(hidden_probs(data, rbm1, up1), rng)
    rbm2 = train_rbm(hidden, (shape.m1, shape.m2), cfg2.with_seed(rng.integers(2**63)), up2, down2)
    return DbmParams(rbm1.W, rbm2.W, rbm1.b, rbm1.c, rbm2.c)


def mean_field_positive(V, p, iterations=10):
    """Mean-field posterior over both hidden layers with ``v`` clamped.

    The first pass ignores the top layer; afterwards both layers are updated
    alternately ``iterations`` times.
    """
    V = _batch(V, p.b.size, "visible batch")
    mu1 = cond_h1(V, np.zeros((len(V), p.c2.size)), p)
    mu2 = cond_h2(mu1, p)
    for _ in range(iterations):
        mu1 = cond_h1(V, mu2, p)
        mu2 = cond_h2(mu1, p)
    return MeanFieldState(mu1, mu2)


def gibbs_negative(particles, p, steps, rng):
    """Advance the persistent chain ``steps`` sweeps; returns new particles.

    One sweep samples h1 given (v, h2), then h2 and v given h1.
    """
    v, h1, h2 = particles.v, particles.h1, particles.h2
    for _ in range(steps):
        h1 = bernoulli(sigmoid(v @ p.W1 + h2 @ p.W2.T + p.c1), rng)
        h2 = bernoulli(sigmoid(h1 @ p.W2 + p.c2), rng)
        v = bernoulli(sigmoid(h1 @ p.W1.T + p.b), rng)
    return FantasyParticles(v, h1, h2)


def finetune(data, p, cfg, particles=None, mf_iterations=10, gibbs_steps=5, rng=None):
    """Fine-tune all DBM parameters jointly.

    Every mini-batch update ascends the approximate log-likelihood gradient:
    mean-field statistics of the data minus statistics of the persistent
    fantasy particles, each averaged over its own rows. Momentum and L2 decay
    on the weights follow ``cfg``.

    Parameters
    ----------
    data : array_like
        Binary training rows.
    p : DbmParams
        Starting parameters (not modified).
    cfg : TrainConfig
    particles : FantasyParticles, optional
        Persistent chain state. Defaults to ``min(cfg.batch_size, len(data))``
        random particles.
    rng : numpy.random.Generator, optional
        Defaults to a generator seeded with ``cfg.seed``.

    Returns
    -------
    tuple of (DbmParams, FantasyParticles)
    """
    data = _batch(data, p.b.size, "training data")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    rows = len(data)
    bs = min(cfg.batch_size, rows)
    if particles is None:
        particles = FantasyParticles.random(bs, p.shape, rng)
    lr, decay = cfg.learning_rate, cfg.weight_decay
    W1, W2, b, c1, c2 = (a.copy() for a in p.arrays())
    vel = [np.zeros_like(a) for a in (W1, W2, b, c1, c2)]
    cur = DbmParams(W1, W2, b, c1, c2)
    for epoch in range(cfg.epochs):
        mom = cfg.momentum_at(epoch)
        order = rng.permutation(rows)
        for start in range(0, rows, bs):
            V = data[order[start:start + bs]]
            mf = mean_field_positive(V, cur, mf_iterations)
            particles = gibbs_negative(particles, cur, gibbs_steps, rng)
            pv, ph1, ph2 = particles.v, particles.h1, particles.h2
            k, q = len(V), len(pv)
            grads = (
                V.T @ mf.mu1 / k - pv.T @ ph1 / q - decay * W1,
                mf.mu1.T @ mf.mu2 / k - ph1.T @ ph2 / q - decay * W2,
                V.mean(axis=0) - pv.mean(axis=0),
                mf.mu1.mean(axis=0) - ph1.mean(axis=0),
                mf.mu2.mean(axis=0) - ph2.mean(axis=0),
            )
            for param, v_, g in zip((W1, W2, b, c1, c2), vel, grads):
                v_ *= mom
                v_ += lr * g
                param += v_
            if not np.isfinite(W1).all() or not np.isfinite(W2).all():
                raise TrainingDivergenceError("DBM weights became non-finite during fine-tuning")
    if not cur.is_finite():
        raise TrainingDivergenceError("DBM parameters became non-finite during fine-tuning")
    return cur, particles


def sample_population(p, init, iterations=25, rng=None):
    """Draw one candidate per row of ``init`` from the DBM's Gibbs chain.

    The visible layer starts at ``init``, the hidden layers at a stochastic
    upward pass; the final binary visible states are returned.
    """
    init = _batch(init, p.b.size, "initial batch")
    if iterations == 0:
        return init.copy()
    rng = np.random.default_rng() if rng is None else rng
    h1 = bernoulli(cond_h1(init, np.zeros((len(init), p.c2.size)), p), rng)
    h2 = bernoulli(cond_h2(h1, p), rng)
    chain = gibbs_negative(FantasyParticles(init, h1, h2), p, iterations, rng)
    return chain.v


# --- persistence ------------------------------------------------------------

def save_dbm(p, path):
    """Write ``dbm <n> <m1> <m2>`` then W1, W2 (row-major), b, c1 and c2."""
    def fmt(row):
        return " ".join(f"{x:.17g}" for x in row)

    s = p.shape
    lines = [f"dbm {s.n} {s.m1} {s.m2}"]
    lines += [fmt(r) for r in p.W1]
    lines += [fmt(r) for r in p.W2]
    lines += [fmt(p.b), fmt(p.c1), fmt(p.c2)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_dbm(path):
    path = str(path)
    with open(path) as fh:
        lines = [(no, ln.strip()) for no, ln in enumerate(fh, start=1) if ln.strip()]
    n, m1, m2 = parse_header(lines, "dbm", 3, path)
    rows = read_float_rows(lines[1:], [m1] * n + [m2] * m1 + [n, m1, m2], path)
    W1 = np.array(rows[:n]).reshape(n, m1)
    W2 = np.array(rows[n:n + m1]).reshape(m1, m2)
    b, c1, c2 = rows[n + m1:]
    p = DbmParams(W1, W2, b, c1, c2)
    if not p.is_finite():
        raise ParseError("parameters must be finite", None, path)
    return p

