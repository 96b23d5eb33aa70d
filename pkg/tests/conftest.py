"""Shared helpers and reference implementations for the test suite.

The "brute_*" functions are deliberately literal re-derivations -- explicit
loops, two-pass moments, no prefix sums -- so they share nothing with the
library code paths they are used to check.
"""
from __future__ import annotations

import numpy as np

from momentset import Sample, SFunction


def two_pass_moments(values):
    """Mean and (population) standard deviation, the textbook way."""
    v = np.asarray(values, dtype=float)
    mu = float(v.sum()) / v.size
    var = float(((v - mu) ** 2).sum()) / v.size
    return mu, float(np.sqrt(max(var, 0.0)))


def brute_interval_stat(sample, model, theta, sigma, s=None, denom="truncated"):
    """Enumerate every data-interval instrument by explicit row masks.

    denom='truncated' studentizes each component by max(sd, sigma);
    denom='unit' uses the raw means (the bounded-weight statistic with
    omega = 1).  O(n^3); keep n small.
    """
    if s is None:
        s = SFunction(kind="neg_part_sup_norm")
    xs = sample.x[:, 0]
    vals = np.unique(xs)
    m = model.moment_matrix(sample, np.asarray(theta, dtype=float))
    best = 0.0
    lowers = [-np.inf] + [float(v) for v in vals]
    for i, lo in enumerate(lowers):
        uppers = vals if i == 0 else vals[i:]
        for hi in uppers:
            g = ((xs > lo) & (xs <= hi)).astype(float)
            t_vec = []
            for j in range(m.shape[1]):
                mu, sd = two_pass_moments(m[:, j] * g)
                if denom == "truncated":
                    t_vec.append(mu / max(sd, sigma))
                else:
                    t_vec.append(mu)
            best = max(best, float(s.value(np.asarray(t_vec))))
    return best


def brute_hausdorff(a, b):
    """Double-loop Hausdorff distance with the empty-set conventions."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a.reshape(0, 1) if a.size == 0 else np.atleast_2d(a)
    b = b.reshape(0, 1) if b.size == 0 else np.atleast_2d(b)
    if a.shape[0] == 0 and b.shape[0] == 0:
        return 0.0
    if a.shape[0] == 0 or b.shape[0] == 0:
        return float("inf")

    def directed(p, q):
        worst = 0.0
        for row in p:
            best = np.inf
            for other in q:
                best = min(best, float(np.sqrt(((row - other) ** 2).sum())))
            worst = max(worst, best)
        return worst

    return max(directed(a, b), directed(b, a))


def interval_sample(n, seed, censored=False):
    """Random (x, w_l, w_h) sample with the interval column layout."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2.0, 2.0, size=(n, 1))
    w_l = 0.5 * x[:, 0] - 0.3 + rng.normal(size=n)
    w_h = w_l + rng.uniform(0.0, 1.5, size=n)
    if censored:
        drop = rng.random(n) < 0.2
        w_l = np.where(drop, -np.inf, w_l)
        w_h = np.where(rng.random(n) < 0.2, np.inf, w_h)
    return Sample(x=x, w=np.column_stack([x[:, 0], w_l, w_h]))


def one_sided_sample(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.5, 1.5, size=(n, 1))
    w_out = 0.25 + 0.5 * x[:, 0] + rng.normal(size=n)
    return Sample(x=x, w=np.column_stack([x[:, 0], w_out]))
