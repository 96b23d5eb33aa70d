"""Compiled scan extension vs the NumPy fallback: exact agreement."""
from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from momentset import _kernels
from momentset import _scan_py

try:
    from momentset import _scan as _scan_ext
except ImportError:
    _scan_ext = None


def random_profile(rng, with_ties=True):
    n = int(rng.integers(4, 120))
    d = int(rng.integers(1, 3))
    z = rng.normal(size=(d, n))
    x = rng.uniform(-1, 1, size=n)
    if with_ties and n > 8:
        x[rng.integers(0, n, size=n // 4)] = x[0]
    x.sort()
    changes = np.flatnonzero(np.diff(x)) + 1
    cuts = np.concatenate([[0], changes, [n]]).astype(np.int64)
    return _kernels.scan_profile(np.ascontiguousarray(z), cuts), n


def test_backend_name_valid():
    assert _kernels.backend_name() in ("compiled", "numpy")


def test_prescan_pairs_structure():
    for B in (1, 2, 3, 7, 16, 101):
        a, b = _kernels.prescan_pairs(B)
        assert (a >= 0).all() and (b <= B).all() and (a < b).all()
        spans = set(zip(a.tolist(), b.tolist()))
        assert (0, B) in spans  # the full interval
        for i in range(B):
            assert (i, i + 1) in spans  # every single block
        assert len(a) <= 6 * B + 20  # O(B) pairs overall


def test_scan_profile_prefix_sums():
    rng = np.random.default_rng(269)
    z = rng.normal(size=(2, 9))
    cuts = np.array([0, 2, 3, 7, 9], dtype=np.int64)
    P, Q, sminP = _kernels.scan_profile(np.ascontiguousarray(z), cuts)
    for j in range(2):
        for bi in range(len(cuts)):
            assert P[j, bi] == pytest.approx(z[j, : cuts[bi]].sum(), abs=1e-12)
            assert Q[j, bi] == pytest.approx((z[j, : cuts[bi]] ** 2).sum(), abs=1e-12)
        for bi in range(len(cuts) - 1):
            assert sminP[j, bi] == pytest.approx(P[j, bi + 1:].min(), abs=1e-12)


def test_raw_scan_is_max_drawdown():
    rng = np.random.default_rng(271)
    for _ in range(30):
        (P, _, _), n = random_profile(rng)
        v, a, b, j = _kernels.raw_interval_scan(P, n)
        d, B1 = P.shape
        best = -np.inf
        for jj in range(d):
            for aa in range(B1 - 1):
                for bb in range(aa + 1, B1):
                    best = max(best, (P[jj, aa] - P[jj, bb]) / n)
        assert v == pytest.approx(best, abs=1e-12)
        assert (P[j, a] - P[j, b]) / n == pytest.approx(v, abs=1e-12)


@pytest.mark.skipif(_scan_ext is None, reason="compiled extension not built")
def test_backends_bitwise_identical():
    rng = np.random.default_rng(277)
    for trial in range(60):
        (P, Q, sminP), n = random_profile(rng)
        sn = float(rng.uniform(0.01, 0.5))
        cap = np.inf if trial % 3 == 0 else float(rng.uniform(0.0, 2.0))
        pre_a, pre_b = _kernels.prescan_pairs(P.shape[1] - 1)
        got_c = _scan_ext.studentized_scan(P, Q, sminP, float(n), sn,
                                           float(cap), pre_a, pre_b)
        got_py = _scan_py.studentized_scan(P, Q, sminP, float(n), sn,
                                           float(cap), pre_a, pre_b)
        assert got_c == got_py  # exact float and index equality


@pytest.mark.skipif(_scan_ext is None, reason="compiled extension not built")
def test_scan_matches_literal_double_loop():
    rng = np.random.default_rng(281)
    for _ in range(25):
        (P, Q, sminP), n = random_profile(rng)
        sn = float(rng.uniform(0.02, 0.3))
        v, a, b, j, tr = _kernels.studentized_interval_scan(P, Q, sminP, n, sn)
        assert not tr
        d, B1 = P.shape
        best = -np.inf
        for jj in range(d):
            for aa in range(B1 - 1):
                for bb in range(aa + 1, B1):
                    mu = (P[jj, bb] - P[jj, aa]) / n
                    q = (Q[jj, bb] - Q[jj, aa]) / n
                    sd = np.sqrt(max(q - mu * mu, 0.0))
                    best = max(best, -mu / max(sd, sn))
        assert v == pytest.approx(best, abs=1e-12)
