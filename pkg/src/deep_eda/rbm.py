"""Bernoulli-Bernoulli restricted Boltzmann machine trained by CD-k.

The RBM is the building block of greedy layer-wise DBM pretraining. Weight
scale factors let the same code train the bottom RBM (doubled upward input)
and the top RBM (doubled downward input) of a two-layer DBM stack.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import ConfigError, ParseError, ShapeError, TrainingDivergenceError


def sigmoid(x):
    """Logistic function ``1 / (1 + exp(-x))``."""
    return expit(x)


def bernoulli(probs, rng):
    """Sample binary states (float 0/1) with the given activation probabilities."""
    return (rng.random(probs.shape) < probs).astype(float)


@dataclass
class RbmParams:
    """Weights ``W`` (n x m), visible biases ``b`` (n) and hidden biases ``c`` (m)."""

    W: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        if self.W.shape != (self.b.size, self.c.size):
            raise ShapeError(f"W has shape {self.W.shape}, biases imply {(self.b.size, self.c.size)}")

    @property
    def n(self):
        return self.W.shape[0]

    @property
    def m(self):
        return self.W.shape[1]

    @classmethod
    def zeros(cls, n, m):
        return cls(np.zeros((n, m)), np.zeros(n), np.zeros(m))

    def copy(self):
        return RbmParams(self.W.copy(), self.b.copy(), self.c.copy())

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in (self.W, self.b, self.c))

    def __eq__(self, other):
        if not isinstance(other, RbmParams):
            return NotImplemented
        return all(np.array_equal(x, y) for x, y in zip((self.W, self.b, self.c), (other.W, other.b, other.c)))


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters shared by RBM pretraining and DBM fine-tuning.

    ``momentum`` applies for the first ``momentum_switch_epoch`` epochs and
    ``final_momentum`` afterwards. ``learning_rate`` may be 0 (a frozen model,
    useful for tests) but must stay below 1.
    """

    learning_rate: float = 0.1
    epochs: int = 50
    batch_size: int = 100
    cd_steps: int = 1
    momentum: float = 0.5
    final_momentum: float = 0.9
    momentum_switch_epoch: int = 5
    weight_decay: float = 0.0002
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.learning_rate < 1.0:
            raise ConfigError(f"learning_rate must lie in [0, 1), got {self.learning_rate}")
        if self.cd_steps < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("cd_steps and batch_size must be >= 1 and epochs >= 0")
        if not (0.0 <= self.momentum < 1.0 and 0.0 <= self.final_momentum < 1.0):
            raise ConfigError("momentum values must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")

    def momentum_at(self, epoch):
        return self.momentum if epoch < self.momentum_switch_epoch else self.final_momentum

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


def _check_cols(X, width, what):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != width:
        raise ShapeError(f"{what} has {X.shape[1]} columns, expected {width}")
    return X


def hidden_probs(V, p, scale=1.0):
    """P(h = 1 | v) for each row of ``V``; ``scale`` multiplies the weights."""
    V = _check_cols(V, p.n, "visible batch")
    return sigmoid(scale * (V @ p.W) + p.c)


def visible_probs(H, p, scale=1.0):
    """P(v = 1 | h) for each row of ``H``; ``scale`` multiplies the weights."""
    H = _check_cols(H, p.m, "hidden batch")
    return sigmoid(scale * (H @ p.W.T) + p.b)


def cd_gradient(batch, p, rng, cd_steps=1, up_scale=1.0, down_scale=1.0):
    """Batch-averaged CD-k estimate of the log-likelihood gradient.

    Positive statistics use data-clamped hidden probabilities; the negative
    chain alternates stochastic binary states and its final statistics use the
    sampled visible state with the matching hidden probabilities.

    Returns
    -------
    RbmParams
        Gradient ascent direction for ``W``, ``b`` and ``c``.
    """
    V0 = _check_cols(batch, p.n, "training batch")
    H0 = hidden_probs(V0, p, up_scale)
    h = bernoulli(H0, rng)
    for step in range(cd_steps):
        Vk = bernoulli(visible_probs(h, p, down_scale), rng)
        Hk = hidden_probs(Vk, p, up_scale)
        if step < cd_steps - 1:
            h = bernoulli(Hk, rng)
    size = V0.shape[0]
    return RbmParams(
        (V0.T @ H0 - Vk.T @ Hk) / size,
        (V0 - Vk).mean(axis=0),
        (H0 - Hk).mean(axis=0),
    )


def _apply(p, grad, velocity, lr, momentum, weight_decay):
    """Momentum step with L2 decay on the weights only; returns new params."""
    if velocity is None:
        velocity = RbmParams.zeros(p.n, p.m)
    velocity.W[...] = momentum * velocity.W + lr * (grad.W - weight_decay * p.W)
    velocity.b[...] = momentum * velocity.b + lr * grad.b
    velocity.c[...] = momentum * velocity.c + lr * grad.c
    new = RbmParams(p.W + velocity.W, p.b + velocity.b, p.c + velocity.c)
    if not new.is_finite():
        raise TrainingDivergenceError("RBM parameters became non-finite")
    return new


def cd_update(batch, p, cfg, rng, velocity=None, momentum=None, up_scale=1.0, down_scale=1.0):
    """One CD-k parameter update on a mini-batch.

    Parameters
    ----------
    batch : array_like
        Binary rows of length ``p.n``.
    p : RbmParams
        Current parameters (not modified).
    cfg : TrainConfig
        Supplies learning rate, CD steps and weight decay.
    rng : numpy.random.Generator
    velocity : RbmParams, optional
        Momentum buffer, updated in place. Without it the step has no memory.
    momentum : float, optional
        Overrides ``cfg.momentum``.

    Returns
    -------
    RbmParams
        Updated parameters.
    """
    grad = cd_gradient(batch, p, rng, cfg.cd_steps, up_scale, down_scale)
    mom = cfg.momentum if momentum is None else momentum
    return _apply(p, grad, velocity, cfg.learning_rate, mom, cfg.weight_decay)


def init_params(data, m, rng):
    """Small Gaussian weights, data-matched visible biases, zero hidden biases."""
    data = np.asarray(data, dtype=float)
    n = data.shape[1]
    W = rng.normal(0.0, 0.01, size=(n, m))
    mean = np.clip(data.mean(axis=0), 0.01, 0.99) if len(data) else np.full(n, 0.5)
    return RbmParams(W, np.log(mean / (1.0 - mean)), np.zeros(m))


def train_rbm(data, shape, cfg, up_scale=1.0, down_scale=1.0):
    """Train an RBM with shuffled mini-batch CD-k.

    ``shape`` is ``(n, m)``. The batch size is capped at the number of rows.
    The result depends only on ``data``, ``shape``, ``cfg`` and the scales.
    """
    n, m = shape
    if m < 1:
        raise ConfigError("an RBM needs at least one hidden unit")
    data = _check_cols(data, n, "training data")
    rng = np.random.default_rng(cfg.seed)
    p = init_params(data, m, rng)
    velocity = RbmParams.zeros(n, m)
    rows = len(data)
    bs = min(cfg.batch_size, rows)
    for epoch in range(cfg.epochs):
        mom = cfg.momentum_at(epoch)
        order = rng.permutation(rows)
        for start in range(0, rows, bs):
            batch = data[order[start:start + bs]]
            p = cd_update(batch, p, cfg, rng, velocity, mom, up_scale, down_scale)
    return p


def save_rbm(p, path):
    """Write ``rbm <n> <m>`` then W (row-major), b and c, one row per line."""
    rows = [f"rbm {p.n} {p.m}"]
    rows += [" ".join(f"{x:.17g}" for x in r) for r in p.W]
    rows.append(" ".join(f"{x:.17g}" for x in p.b))
    rows.append(" ".join(f"{x:.17g}" for x in p.c))
    Path(path).write_text("\n".join(rows) + "\n")


def read_float_rows(lines, counts, path):
    """Parse ``(lineno, text)`` pairs into float rows with the given lengths."""
    if len(lines) != len(counts):
        lineno = lines[min(len(lines), len(counts)) - 1][0] + 1 if lines else 2
        raise ParseError(f"expected {len(counts)} data lines, found {len(lines)}", lineno, path)
    out = []
    for (no, text), count in zip(lines, counts):
        try:
            row = [float(tok) for tok in text.split()]
        except ValueError:
            raise ParseError("values must be numbers", no, path) from None
        if len(row) != count:
            raise ParseError(f"expected {count} values, found {len(row)}", no, path)
        out.append(row)
    return out


def parse_header(lines, tag, count, path):
    """Validate a ``<tag> <int> ...`` header line and return its integers."""
    parts = lines[0][1].split() if lines else []
    try:
        if len(parts) != count + 1 or parts[0] != tag:
            raise ValueError
        sizes = [int(x) for x in parts[1:]]
    except ValueError:
        fields = " ".join(f"<d{i}>" for i in range(count))
        raise ParseError(f"header must read '{tag} {fields}'", lines[0][0] if lines else 1, path) from None
    if any(x < 1 for x in sizes):
        raise ParseError("layer sizes must be positive", lines[0][0], path)
    return sizes


def load_rbm(path):
    path = str(path)
    with open(path) as fh:
        lines = [(no, ln.strip()) for no, ln in enumerate(fh, start=1) if ln.strip()]
    n, m = parse_header(lines, "rbm", 2, path)
    rows = read_float_rows(lines[1:], [m] * n + [n, m], path)
    return RbmParams(np.array(rows[:n]).reshape(n, m), rows[n], rows[n + 1])
