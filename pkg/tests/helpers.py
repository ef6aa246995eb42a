"""Shared builders for the oracle tests."""

import math

import numpy as np

from ddace.demo import ActionSpec, Demonstration, NodeDescriptor, segment_keyframes
from ddace.tgn import TgnConfig, TgnModel, attention_mask

TINY_BOUNDS = (0.0, 0.0, 4.0, 4.0)
TINY_EDGES = [(0, 2), (1, 2)]


def tiny_demos(seed=0, lengths=(7, 5)):
    """Random two-robot, one-goal demonstrations over a two-action vocabulary."""
    rng = np.random.default_rng(seed)
    nodes = (NodeDescriptor(0, "robot"), NodeDescriptor(1, "robot"), NodeDescriptor(2, "goal"))
    vocab = (ActionSpec("idle"), ActionSpec("move", motion=True, duration=0.0))
    out = []
    for T in lengths:
        labels = np.zeros((T, 3), dtype=int)
        labels[:, :2] = rng.integers(0, 2, size=(T, 2))
        out.append(Demonstration(nodes, rng.uniform(0, 4, size=(T, 3, 2)), labels, vocab))
    return out


def tiny_model(seed=0, scale=1.0, dropout=0.0):
    """Tiny network with weights drawn well away from the default init and arbitrary BN statistics."""
    cfg = TgnConfig(3, 2, gat_hidden=3, gru_hidden=4, dropout_rate=dropout, seed=seed,
                    bounds=TINY_BOUNDS)
    model = TgnModel.initialize(cfg)
    rng = np.random.default_rng(seed + 1000)
    for k, v in model.params.items():
        lo, hi = (0.5, 1.5) if k.endswith("gamma") else (-scale, scale)
        model.params[k] = rng.uniform(lo, hi, size=v.shape)
    for k, v in model.buffers.items():
        model.buffers[k] = rng.uniform(0.5, 1.5, v.shape) if "var" in k else rng.normal(0, 0.3, v.shape)
    return model


def tiny_setup(seed=0):
    seqs = [segment_keyframes(d, i) for i, d in enumerate(tiny_demos(seed))]
    return tiny_model(seed), seqs, attention_mask(TINY_EDGES, [0, 1, 2])


def finite_difference(f, params, name, h):
    """Central differences of scalar ``f()`` over every entry of ``params[name]``."""
    block = params[name]
    out = np.zeros_like(block)
    for idx in np.ndindex(block.shape):
        orig = block[idx]
        block[idx] = orig + h
        up = f()
        block[idx] = orig - h
        down = f()
        block[idx] = orig
        out[idx] = (up - down) / (2 * h)
    return out


def relative_error(analytic, numeric, floor=1e-7):
    """Max-norm relative error. The floor keeps exactly-zero blocks from dividing by zero."""
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric)) / scale)


def frechet_by_couplings(P, Q):
    """Minimum over every monotone coupling of the largest paired distance.

    Depth-first enumeration of couplings; branches already worse than the best
    complete coupling are cut, which never changes the minimum.
    """
    P, Q = [tuple(map(float, p)) for p in P], [tuple(map(float, q)) for q in Q]
    n, m = len(P), len(Q)

    def d2(i, j):
        dx, dy = P[i][0] - Q[j][0], P[i][1] - Q[j][1]
        return dx * dx + dy * dy

    best = [float("inf")]

    def walk(i, j, worst):
        worst = max(worst, d2(i, j))
        if worst >= best[0]:
            return
        if (i, j) == (n - 1, m - 1):
            best[0] = worst
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            if i + di < n and j + dj < m:
                walk(i + di, j + dj, worst)

    walk(0, 0, 0.0)
    return math.sqrt(best[0])
