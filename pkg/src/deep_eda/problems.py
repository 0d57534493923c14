"""Benchmark fitness functions for binary optimization.

Four problem families are provided: onemax, concatenated deceptive traps,
NK landscapes and the hierarchical if-and-only-if function (HIFF). Every
evaluator accepts a single genome (1-D array of 0/1) and returns a float, or
a batch of genomes (2-D array, one genome per row) and returns a float array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EnumerationLimitError, InvalidInstanceError, ParameterError, ParseError

PROBLEM_KINDS = ("onemax", "trap", "nk", "hiff")

# Largest NK instance whose optimum is certified exhaustively.
MAX_CERTIFIED_NK = 34
# Up to this size the certification is a flat enumeration of every genome.
_FLAT_ENUMERATION_LIMIT = 20


def as_genomes(g, n=None):
    """Validate a genome or batch of genomes and return it as a uint8 array."""
    arr = np.asarray(g)
    if arr.ndim not in (1, 2):
        raise InvalidInstanceError(f"genome array must be 1-D or 2-D, got {arr.ndim}-D")
    if arr.shape[-1] == 0:
        raise InvalidInstanceError("genome length must be positive")
    if n is not None and arr.shape[-1] != n:
        raise InvalidInstanceError(f"genome length {arr.shape[-1]} does not match instance size {n}")
    if arr.dtype != np.uint8:
        if not np.all((arr == 0) | (arr == 1)):
            raise InvalidInstanceError("genome entries must be 0 or 1")
        arr = arr.astype(np.uint8)
    elif arr.size and arr.max() > 1:
        raise InvalidInstanceError("genome entries must be 0 or 1")
    return arr


def _result(values, single):
    return float(values) if single else np.asarray(values, dtype=float)


def evaluate_onemax(g):
    """Number of ones in the genome."""
    arr = as_genomes(g)
    return _result(arr.sum(axis=-1, dtype=np.int64), arr.ndim == 1)


def evaluate_trap(g, k):
    """Concatenated deceptive traps over consecutive blocks of ``k`` bits.

    A block scores ``k`` when all its bits are one and ``k - (ones + 1)``
    otherwise, so the all-zeros block is a deceptive local optimum worth
    ``k - 1``.
    """
    arr = as_genomes(g)
    if k < 1 or arr.shape[-1] % k:
        raise InvalidInstanceError(f"genome length {arr.shape[-1]} is not a multiple of trap size {k}")
    ones = arr.reshape(arr.shape[:-1] + (-1, k)).sum(axis=-1, dtype=np.int64)
    scores = np.where(ones == k, k, k - ones - 1)
    return _result(scores.sum(axis=-1), arr.ndim == 1)


def evaluate_hiff(g):
    """Hierarchical if-and-only-if fitness.

    At level ``l`` (starting at 1) the current string is cut into pairs; a pair
    of two equal non-null symbols scores ``2**l`` and maps to that symbol,
    anything else scores 0 and maps to null. No per-bit term is added, so the
    all-ones genome of length ``2**L`` scores ``L * 2**L``.
    """
    arr = as_genomes(g)
    n = arr.shape[-1]
    levels = int(round(math.log2(n))) if n > 1 else 0
    if n < 2 or 2**levels != n:
        raise InvalidInstanceError(f"HIFF length must be a power of two >= 2, got {n}")
    null = 2
    cur = arr.astype(np.int8)
    total = np.zeros(arr.shape[:-1], dtype=np.int64)
    for level in range(1, levels + 1):
        pairs = cur.reshape(cur.shape[:-1] + (-1, 2))
        left, right = pairs[..., 0], pairs[..., 1]
        agree = (left == right) & (left != null)
        total += agree.sum(axis=-1) * 2**level
        cur = np.where(agree, left, null).astype(np.int8)
    return _result(total, arr.ndim == 1)


@dataclass(eq=False)
class NkInstance:
    """An NK landscape.

    Component ``i`` reads bit ``i`` followed by the bits at ``neighbors[i]`` (in
    stored order) and looks the resulting pattern up in ``tables[i]``; bit ``i``
    is the most significant bit of the table index.
    """

    n: int
    k: int
    neighbors: np.ndarray  # (n, k) int
    tables: np.ndarray  # (n, 2**(k+1)) float
    known_optimum: float

    def __post_init__(self):
        self.neighbors = np.asarray(self.neighbors, dtype=np.int64).reshape(self.n, self.k)
        self.tables = np.asarray(self.tables, dtype=float).reshape(self.n, 2 ** (self.k + 1))
        self.known_optimum = float(self.known_optimum)
        self.validate()

    def validate(self):
        n, k = self.n, self.k
        if n < 1 or k < 0 or k >= n:
            raise InvalidInstanceError(f"need 0 <= k < n, got n={n}, k={k}")
        for i, row in enumerate(self.neighbors):
            if len(set(row.tolist())) != k or np.any(row < 0) or np.any(row >= n) or i in row:
                raise InvalidInstanceError(f"component {i}: neighbors must be {k} distinct indices in [0, {n}) other than {i}")
        if not np.all((self.tables >= 0.0) & (self.tables <= 1.0)):
            raise InvalidInstanceError("table values must lie in [0, 1]")

    @property
    def columns(self):
        """(n, k+1) variable indices read by each component, own bit first."""
        return np.column_stack([np.arange(self.n), self.neighbors])

    def __eq__(self, other):
        if not isinstance(other, NkInstance):
            return NotImplemented
        return (
            self.n == other.n
            and self.k == other.k
            and np.array_equal(self.neighbors, other.neighbors)
            and np.array_equal(self.tables, other.tables)
            and self.known_optimum == other.known_optimum
        )


def _nk_component_values(arr, inst):
    weights = 1 << np.arange(inst.k, -1, -1)
    idx = (arr[..., inst.columns].astype(np.int64) * weights).sum(axis=-1)
    return inst.tables[np.arange(inst.n), idx]


def evaluate_nk(g, inst):
    """Mean of the ``n`` component table lookups; always in [0, 1]."""
    arr = as_genomes(g, inst.n)
    values = _nk_component_values(arr, inst)
    # fixed left-to-right order so single genomes and batches round identically
    total = values[..., 0].copy()
    for i in range(1, inst.n):
        total += values[..., i]
    return _result(total / inst.n, arr.ndim == 1)


def _all_genomes(n, start=0, stop=None):
    codes = np.arange(start, 2**n if stop is None else stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1)
    return ((codes[:, None] >> shifts) & 1).astype(np.uint8)


def _flat_nk_argmax(inst, chunk=1 << 16):
    best, best_g = -np.inf, None
    for start in range(0, 2**inst.n, chunk):
        block = _all_genomes(inst.n, start, min(start + chunk, 2**inst.n))
        f = evaluate_nk(block, inst)
        j = int(np.argmax(f))
        if f[j] > best:
            best, best_g = f[j], block[j]
    return best_g


def _branch_and_bound_nk_argmax(inst, chunk=1 << 15):
    """Exact maximizer by depth-first branch and bound over bit assignments.

    Variables are fixed in index order. The bound of a partial assignment sums,
    per component, the largest table entry consistent with the bits fixed so
    far. Nodes whose bound falls below the incumbent are discarded.
    """
    n, k = inst.n, inst.k
    cols = inst.columns
    weights = 1 << np.arange(k, -1, -1)
    # best_tables[d][i, x]: max over completions of the bits of component i
    # not yet fixed at depth d (i.e. variables >= d), for table index x.
    best_tables = np.empty((n + 1, n, 2 ** (k + 1)))
    for d in range(n + 1):
        for i in range(n):
            t = inst.tables[i].reshape((2,) * (k + 1))
            free = tuple(p for p in range(k + 1) if cols[i, p] >= d)
            if free:
                t = np.broadcast_to(t.max(axis=free, keepdims=True), (2,) * (k + 1))
            best_tables[d, i] = t.reshape(-1)
    rows = np.arange(n)

    def bound(front, depth):
        idx = (front[:, cols].astype(np.int64) * weights).sum(axis=-1)
        return best_tables[depth][rows, idx].sum(axis=1)

    rng = np.random.default_rng(0)
    incumbent = _hill_climb_nk(inst, rng)
    incumbent_sum = _nk_component_values(incumbent, inst).sum()
    tol = 1e-9 * n

    stack = [(0, np.zeros((1, n), dtype=np.uint8))]
    while stack:
        depth, front = stack.pop()
        ones = front.copy()
        ones[:, depth] = 1
        front = np.concatenate([front, ones])
        depth += 1
        b = bound(front, depth)
        keep = b >= incumbent_sum - tol
        front, b = front[keep], b[keep]
        if not len(front):
            continue
        if depth == n:
            j = int(np.argmax(b))
            if b[j] > incumbent_sum:
                incumbent, incumbent_sum = front[j].copy(), b[j]
            continue
        order = np.argsort(b, kind="stable")
        front = front[order]
        # Most promising chunk is pushed last so it is explored first.
        for start in range(0, len(front), chunk):
            stack.append((depth, front[start:start + chunk]))
    return incumbent


def _hill_climb_nk(inst, rng, restarts=32):
    """First-improvement bit-flip hill climbing; supplies an incumbent."""
    best_g, best_f = None, -np.inf
    for _ in range(restarts):
        g = rng.integers(0, 2, inst.n, dtype=np.uint8)
        f = evaluate_nk(g, inst)
        improved = True
        while improved:
            improved = False
            flips = np.repeat(g[None, :], inst.n, axis=0)
            flips[np.arange(inst.n), np.arange(inst.n)] ^= 1
            ff = evaluate_nk(flips, inst)
            j = int(np.argmax(ff))
            if ff[j] > f:
                g, f, improved = flips[j], ff[j], True
        if f > best_f:
            best_g, best_f = g, f
    return best_g


def nk_optimum(inst):
    """Certified global maximum of an NK instance (n <= 34).

    Returns
    -------
    tuple of (float, numpy.ndarray)
        The maximum fitness, computed with :func:`evaluate_nk` on the returned
        maximizing genome so that it compares exactly with evaluated fitness.
    """
    if inst.n > MAX_CERTIFIED_NK:
        raise EnumerationLimitError(f"cannot certify the optimum of an NK instance with n={inst.n} > {MAX_CERTIFIED_NK}")
    if inst.n <= _FLAT_ENUMERATION_LIMIT:
        g = _flat_nk_argmax(inst)
    else:
        g = _branch_and_bound_nk_argmax(inst)
    return evaluate_nk(g, inst), g


def generate_nk_instance(n, k, seed, known_optimum=None):
    """Random NK landscape with uniform [0, 1) tables.

    Neighbors of component ``i`` are ``k`` indices drawn uniformly without
    replacement from the other ``n - 1`` variables. The optimum is certified by
    exhaustive search when ``n <= 34``; larger instances need ``known_optimum``.
    """
    if n < 1 or k < 0 or k >= n:
        raise ParameterError(f"need 0 <= k < n, got n={n}, k={k}")
    if known_optimum is None and n > MAX_CERTIFIED_NK:
        raise ParameterError(
            f"n={n} is too large to certify the optimum; pass known_optimum explicitly"
        )
    rng = np.random.default_rng(seed)
    neighbors = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        others = np.delete(np.arange(n), i)
        neighbors[i] = rng.choice(others, size=k, replace=False)
    tables = rng.random((n, 2 ** (k + 1)))
    inst = NkInstance(n, k, neighbors, tables, known_optimum=0.0 if known_optimum is None else known_optimum)
    if known_optimum is None:
        inst.known_optimum = nk_optimum(inst)[0]
    return inst


def save_nk_instance(inst, path):
    """Write an NK instance in the line-oriented text format."""
    lines = [f"nk {inst.n} {inst.k} {inst.known_optimum:.17g}"]
    lines += [" ".join(str(int(j)) for j in row) for row in inst.neighbors]
    lines += [" ".join(f"{x:.17g}" for x in row) for row in inst.tables]
    Path(path).write_text("\n".join(lines) + "\n")


def load_nk_instance(path):
    """Parse an NK instance file; errors carry the offending line number."""
    path = str(path)
    with open(path) as fh:
        lines = [(no, ln.strip()) for no, ln in enumerate(fh, start=1)]
    lines = [(no, ln) for no, ln in lines if ln]
    if not lines:
        raise ParseError("empty NK instance file", 1, path)
    no, header = lines[0]
    parts = header.split()
    if len(parts) != 4 or parts[0] != "nk":
        raise ParseError("header must read 'nk <n> <k> <known_optimum>'", no, path)
    try:
        n, k, opt = int(parts[1]), int(parts[2]), float(parts[3])
    except ValueError:
        raise ParseError("malformed header values", no, path) from None
    if n < 1 or k < 0 or k >= n:
        raise ParseError(f"need 0 <= k < n, got n={n}, k={k}", no, path)
    body = lines[1:]
    if len(body) < 2 * n:
        lineno = (body[-1][0] if body else no) + 1
        raise ParseError(f"expected {2 * n} data lines, found {len(body)}", lineno, path)
    if len(body) > 2 * n:
        raise ParseError(f"unexpected data after {2 * n} lines", body[2 * n][0], path)

    neighbors = []
    for no, ln in body[:n]:
        try:
            row = [int(tok) for tok in ln.split()]
        except ValueError:
            raise ParseError("neighbor indices must be integers", no, path) from None
        if len(row) != k:
            raise ParseError(f"expected {k} neighbor indices, found {len(row)}", no, path)
        i = len(neighbors)
        if len(set(row)) != k or any(j < 0 or j >= n or j == i for j in row):
            raise ParseError(f"invalid neighbor list for component {i}", no, path)
        neighbors.append(row)
    tables = []
    for no, ln in body[n:]:
        try:
            row = [float(tok) for tok in ln.split()]
        except ValueError:
            raise ParseError("table values must be numbers", no, path) from None
        if len(row) != 2 ** (k + 1):
            raise ParseError(f"expected {2 ** (k + 1)} table values, found {len(row)}", no, path)
        if any(not 0.0 <= x <= 1.0 for x in row):
            raise ParseError("table values must lie in [0, 1]", no, path)
        tables.append(row)
    return NkInstance(n, k, np.array(neighbors, dtype=np.int64).reshape(n, k), np.array(tables), opt)


@dataclass
class ProblemInstance:
    """One benchmark: its kind, genome length and the best attainable fitness."""

    kind: str
    n: int
    optimum_fitness: float
    trap_k: int | None = None
    nk: NkInstance | None = None

    def __post_init__(self):
        if self.kind not in PROBLEM_KINDS:
            raise InvalidInstanceError(f"unknown problem kind {self.kind!r}")
        if self.n < 1:
            raise InvalidInstanceError("genome length must be positive")
        if self.kind == "trap" and (not self.trap_k or self.n % self.trap_k):
            raise InvalidInstanceError(f"trap length {self.n} is not a multiple of block size {self.trap_k}")
        if self.kind == "hiff" and (self.n < 2 or self.n & (self.n - 1)):
            raise InvalidInstanceError(f"HIFF length must be a power of two, got {self.n}")
        if self.kind == "nk" and (self.nk is None or self.nk.n != self.n):
            raise InvalidInstanceError("nk problem needs an NkInstance of matching size")

    def evaluate(self, g):
        if self.kind == "onemax":
            return evaluate_onemax(as_genomes(g, self.n))
        if self.kind == "trap":
            return evaluate_trap(as_genomes(g, self.n), self.trap_k)
        if self.kind == "hiff":
            return evaluate_hiff(as_genomes(g, self.n))
        return evaluate_nk(g, self.nk)

    @property
    def label(self):
        if self.kind == "trap":
            return f"trap{self.trap_k}-{self.n}"
        if self.kind == "nk":
            return f"nk{self.n}-{self.nk.k}"
        return f"{self.kind}{self.n}"


def make_problem(kind, n, k=None, seed=0, nk=None):
    """Build a :class:`ProblemInstance` with its known optimum filled in.

    ``k`` is the trap block size for ``trap`` (default 5) and the neighbor
    count for ``nk``; ``nk`` may be a pre-built or loaded instance.
    """
    if kind == "onemax":
        return ProblemInstance("onemax", n, float(n))
    if kind == "trap":
        k = 5 if k is None else k
        return ProblemInstance("trap", n, float(n), trap_k=k)
    if kind == "hiff":
        levels = int(round(math.log2(n))) if n > 1 else 0
        return ProblemInstance("hiff", n, float(levels * n))
    if kind == "nk":
        if nk is None:
            nk = generate_nk_instance(n, 4 if k is None else k, seed)
        return ProblemInstance("nk", nk.n, nk.known_optimum, nk=nk)
    raise InvalidInstanceError(f"unknown problem kind {kind!r}")
