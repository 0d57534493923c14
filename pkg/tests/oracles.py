"""Slow, independent reference implementations used as test oracles.

Nothing here imports the package's evaluation or enumeration code; everything
is written with plain loops over Python ints so that it shares no code path
with the vectorized implementations it checks.
"""

import itertools
import math


def genomes(n):
    """All bit tuples of length n, in lexicographic (MSB-first) order."""
    return itertools.product((0, 1), repeat=n)


def onemax(g):
    total = 0
    for bit in g:
        total += bit
    return total


def trap(g, k):
    total = 0
    for start in range(0, len(g), k):
        ones = sum(g[start:start + k])
        total += k if ones == k else k - (ones + 1)
    return total


def hiff(g):
    """Recursive definition: a block scores its size when it is uniform and
    both halves are uniform with the same symbol, summed over all sub-blocks
    of size >= 2."""

    def rec(block):
        if len(block) == 1:
            return block[0], 0
        half = len(block) // 2
        left, fl = rec(block[:half])
        right, fr = rec(block[half:])
        if left is not None and left == right:
            return left, fl + fr + len(block)
        return None, fl + fr

    return rec(tuple(g))[1]


def nk(g, neighbors, tables):
    n = len(g)
    total = 0.0
    for i in range(n):
        bits = [g[i]] + [g[j] for j in neighbors[i]]
        idx = 0
        for b in bits:
            idx = 2 * idx + b
        total += tables[i][idx]
    return total / n


def nk_max(neighbors, tables):
    return max(nk(g, neighbors, tables) for g in genomes(len(tables)))


# --- Boltzmann machines -----------------------------------------------------

def dbm_energy(v, h1, h2, W1, W2, b, c1, c2):
    e = 0.0
    for i, vi in enumerate(v):
        for j, hj in enumerate(h1):
            e -= vi * W1[i][j] * hj
    for j, hj in enumerate(h1):
        for k, hk in enumerate(h2):
            e -= hj * W2[j][k] * hk
    e -= sum(bi * vi for bi, vi in zip(b, v))
    e -= sum(ci * hi for ci, hi in zip(c1, h1))
    e -= sum(ci * hi for ci, hi in zip(c2, h2))
    return e


def dbm_visible_distribution(W1, W2, b, c1, c2):
    """P(v) by summing exp(-E) over the full joint state space.

    The summation runs over joint states in one flat loop (no per-layer
    factorization) and normalizes at the end.
    """
    n, m1, m2 = len(b), len(c1), len(c2)
    weights = {}
    energies = []
    for state in genomes(n + m1 + m2):
        v, h1, h2 = state[:n], state[n:n + m1], state[n + m1:]
        energies.append((v, -dbm_energy(v, h1, h2, W1, W2, b, c1, c2)))
    top = max(e for _, e in energies)
    for v, e in energies:
        weights[v] = weights.get(v, 0.0) + math.exp(e - top)
    z = sum(weights.values())
    return {v: w / z for v, w in weights.items()}


def rbm_visible_distribution(W, b, c):
    """P(v) of an RBM by enumerating all (v, h)."""
    n, m = len(b), len(c)
    un = {}
    for v in genomes(n):
        acc = 0.0
        for h in genomes(m):
            e = sum(b[i] * v[i] for i in range(n)) + sum(c[j] * h[j] for j in range(m))
            e += sum(v[i] * W[i][j] * h[j] for i in range(n) for j in range(m))
            acc += math.exp(e)
        un[v] = acc
    z = sum(un.values())
    return {v: u / z for v, u in un.items()}


def rbm_exact_gradient(data, W, b, c):
    """Exact gradient of the mean data log-likelihood w.r.t. W (as nested lists).

    d/dW_ij = E_data[v_i P(h_j=1|v)] - E_model[v_i h_j], both computed by
    enumeration.
    """
    n, m = len(b), len(c)

    def sig(x):
        return 1.0 / (1.0 + math.exp(-x))

    def hprob(v, j):
        return sig(c[j] + sum(v[i] * W[i][j] for i in range(n)))

    pos = [[0.0] * m for _ in range(n)]
    for v in data:
        for i in range(n):
            for j in range(m):
                pos[i][j] += v[i] * hprob(v, j) / len(data)
    pv = rbm_visible_distribution(W, b, c)
    neg = [[0.0] * m for _ in range(n)]
    for v, p in pv.items():
        for i in range(n):
            for j in range(m):
                neg[i][j] += p * v[i] * hprob(v, j)
    return [[pos[i][j] - neg[i][j] for j in range(m)] for i in range(n)]
