# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled interval-scan kernel.

Evaluates sup over all index-range instruments of the studentized negative
part max_j (-mu_j) / (sigma_j v sigma_n), given per-component prefix sums.
Same scan order and arithmetic as the pure-NumPy implementation in
``_scan_py``; results agree bitwise.
"""
from libc.math cimport sqrt, INFINITY

import numpy as np


def studentized_scan(double[:, ::1] P, double[:, ::1] Q, double[:, ::1] sminP,
                     double n_obs, double sigma_n, double cap,
                     long[::1] pre_a, long[::1] pre_b):
    """Scan all block-index pairs (a, b), a < b, over prefix arrays P, Q.

    P[j, k] is the running sum of component-j moment values over the first k
    tie blocks (P[j, 0] = 0); Q is the same for squared values.  sminP[j, a]
    is min over b > a of P[j, b].  Returns (v_best, a_best, b_best, j_best,
    truncated) where v_best is the max over pairs and components of
    (P[j,a]-P[j,b])/n divided by max(sigma_hat, sigma_n); v_best may be
    negative when no moment is violated (least-slack interval from the
    prescan).  Scanning stops after the first full row on which v_best
    exceeds ``cap``.
    """
    cdef Py_ssize_t d = P.shape[0]
    cdef Py_ssize_t B = P.shape[1] - 1
    cdef Py_ssize_t npre = pre_a.shape[0]
    cdef double inv_n = 1.0 / n_obs
    cdef double sn2 = sigma_n * sigma_n
    cdef double v_best = -INFINITY
    cdef double vb2 = 0.0
    cdef double vfloor = 0.0
    cdef Py_ssize_t a_best = -1, b_best = -1, j_best = -1
    cdef Py_ssize_t i, a, b, j
    cdef double neg, q, var, varc, r, vpair, rb, diff, pa_j, qa_j
    cdef Py_ssize_t jp
    cdef bint positive_best

    # prescan: dyadic pyramid pairs, each evaluated in full
    for i in range(npre):
        a = pre_a[i]
        b = pre_b[i]
        vpair = -INFINITY
        jp = -1
        for j in range(d):
            neg = (P[j, a] - P[j, b]) * inv_n
            q = (Q[j, b] - Q[j, a]) * inv_n
            var = q - neg * neg
            varc = var if var > sn2 else sn2
            r = neg / sqrt(varc)
            if r > vpair:
                vpair = r
                jp = j
        if vpair > v_best:
            v_best = vpair
            a_best = a
            b_best = b
            j_best = jp
    if v_best > cap:
        return v_best, a_best, b_best, j_best, True

    vfloor = v_best if v_best > 0.0 else 0.0
    vb2 = v_best * v_best
    positive_best = v_best > 0.0

    for a in range(B):
        # row bound: best achievable -mu/sigma_n on this row
        rb = -INFINITY
        for j in range(d):
            diff = P[j, a] - sminP[j, a]
            if diff > rb:
                rb = diff
        rb = rb * inv_n / sigma_n
        if rb <= vfloor:
            continue
        for j in range(d):
            pa_j = P[j, a]
            qa_j = Q[j, a]
            for b in range(a + 1, B + 1):
                neg = (pa_j - P[j, b]) * inv_n
                if neg <= 0.0:
                    continue
                q = (Q[j, b] - qa_j) * inv_n
                var = q - neg * neg
                varc = var if var > sn2 else sn2
                # cheap squared pre-test (conservative margin), exact test after
                if positive_best and neg * neg <= vb2 * varc * 0.999999:
                    continue
                r = neg / sqrt(varc)
                if r > v_best:
                    v_best = r
                    a_best = a
                    b_best = b
                    j_best = j
                    vfloor = r
                    vb2 = r * r
                    positive_best = True
        if v_best > cap:
            return v_best, a_best, b_best, j_best, True

    return v_best, a_best, b_best, j_best, False
