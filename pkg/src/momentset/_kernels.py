"""Kernel dispatch for the interval scan.

The supremum over all data intervals is the hot loop of the whole package:
one O(B^2) scan per parameter point per replication.  A compiled Cython
version is used when available; otherwise a pure-NumPy fallback with
identical semantics is selected at import time.  Set
MOMENTSET_FORCE_FALLBACK=1 to ignore the compiled extension.
"""
import os

import numpy as np

from . import _scan_py

try:
    from . import _scan as _scan_ext
except ImportError:  # pragma: no cover - depends on build environment
    _scan_ext = None

_FORCED = bool(os.environ.get("MOMENTSET_FORCE_FALLBACK"))
HAVE_EXT = _scan_ext is not None
_ACTIVE = _scan_ext if (HAVE_EXT and not _FORCED) else _scan_py


def backend_name():
    """Name of the scan backend selected at import ('compiled' or 'numpy')."""
    return "compiled" if _ACTIVE is _scan_ext and _scan_ext is not None else "numpy"


_prescan_cache = {}


def prescan_pairs(B):
    """Dyadic pyramid of block-index pairs covering every scale and location.

    Used to seed the scan with a near-maximal value early so that row
    pruning and early exit trigger quickly.  O(B) pairs in total.
    """
    cached = _prescan_cache.get(B)
    if cached is not None:
        return cached
    a_list, b_list = [], []
    L = B
    while True:
        step = max(1, L // 2)
        for o in range(0, B - L + 1, step):
            a_list.append(o)
            b_list.append(o + L)
        if L == 1:
            break
        L = max(1, (L + 1) // 2)
    pair = (np.asarray(a_list, dtype=np.int64), np.asarray(b_list, dtype=np.int64))
    if len(_prescan_cache) < 64:
        _prescan_cache[B] = pair
    return pair


def scan_profile(z_T, cuts):
    """Prefix arrays for the scan from moment values in x-sorted order.

    Parameters
    ----------
    z_T : (d, n) float64
        Moment values, one row per component, columns in x-sorted order.
    cuts : (B+1,) int64
        Tie-block boundaries: 0 = cuts[0] < ... < cuts[B] = n.  Intervals
        may only begin and end at block boundaries so that observations with
        equal x always enter together.

    Returns
    -------
    P, Q, sminP : (d, B+1) float64
        Running sums of values and squared values over blocks, and the
        suffix minimum sminP[j, a] = min_{b > a} P[j, b].
    """
    d, n = z_T.shape
    B = len(cuts) - 1
    P = np.zeros((d, B + 1))
    Q = np.zeros((d, B + 1))
    np.cumsum(np.add.reduceat(z_T, cuts[:-1], axis=1), axis=1, out=P[:, 1:])
    np.cumsum(np.add.reduceat(z_T * z_T, cuts[:-1], axis=1), axis=1, out=Q[:, 1:])
    tmp = np.minimum.accumulate(P[:, ::-1], axis=1)[:, ::-1]
    sminP = np.empty_like(P)
    sminP[:, :-1] = tmp[:, 1:]
    sminP[:, -1] = np.inf
    return P, Q, sminP


def studentized_interval_scan(P, Q, sminP, n_obs, sigma_n, cap=np.inf):
    """Max over all block pairs and components of -mu_hat/(sigma_hat v sigma_n).

    Returns (v, a_blk, b_blk, j, truncated).  v is unclamped: negative when
    no moment is violated anywhere (the argmax is then the least-slack
    interval seen by the prescan).  When ``cap`` is finite the scan stops
    after the first completed row with v > cap; v is then a valid lower
    bound for the true supremum and membership tests at thresholds <= cap
    are unaffected.
    """
    if sigma_n <= 0.0:
        raise ValueError("sigma_n must be positive for the studentized scan")
    B = P.shape[1] - 1
    pre_a, pre_b = prescan_pairs(B)
    return _ACTIVE.studentized_scan(P, Q, sminP, float(n_obs), float(sigma_n),
                                    float(cap), pre_a, pre_b)


def raw_interval_scan(P, n_obs, weights=None):
    """Max over block pairs of w_j * (-mu_hat_j): a max-drawdown per component.

    The unweighted interval supremum of the negative part reduces to the
    maximum drawdown of each component's prefix-sum path, which is O(B)
    exactly.  ``weights`` are per-component positive constants (default 1).
    Returns (v, a_blk, b_blk, j) with v unclamped.
    """
    d, B1 = P.shape
    B = B1 - 1
    inv_n = 1.0 / n_obs
    v_best = -np.inf
    a_best = b_best = j_best = -1
    for j in range(d):
        w = 1.0 if weights is None else float(weights[j])
        run = np.maximum.accumulate(P[j, :B])
        dd = (run - P[j, 1:]) * (w * inv_n)
        b_rel = int(np.argmax(dd))
        val = float(dd[b_rel])
        if val > v_best:
            v_best = val
            b_best = b_rel + 1
            a_best = int(np.argmax(P[j, :b_best]))
            j_best = j
    return v_best, a_best, b_best, j_best
