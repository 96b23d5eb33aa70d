"""Pure-NumPy interval-scan kernel, used when the compiled extension is absent.

Mirrors the scan order and arithmetic of ``_scan.pyx`` so both backends
return identical results (including argmax indices and truncation behavior).
"""
import numpy as np


def studentized_scan(P, Q, sminP, n_obs, sigma_n, cap, pre_a, pre_b):
    d, B1 = P.shape
    B = B1 - 1
    inv_n = 1.0 / n_obs
    sn2 = sigma_n * sigma_n

    # prescan: evaluate pyramid pairs in full
    neg = (P[:, pre_a] - P[:, pre_b]) * inv_n
    q = (Q[:, pre_b] - Q[:, pre_a]) * inv_n
    var = q - neg * neg
    r = neg / np.sqrt(np.maximum(var, sn2))
    pair_val = r.max(axis=0)
    i = int(np.argmax(pair_val))
    v_best = float(pair_val[i])
    a_best = int(pre_a[i])
    b_best = int(pre_b[i])
    j_best = int(np.argmax(r[:, i]))
    if v_best > cap:
        return v_best, a_best, b_best, j_best, True

    # row bounds: best achievable -mu/sigma_n from each left endpoint
    rb = (P[:, :B] - sminP[:, :B]).max(axis=0) * inv_n / sigma_n

    with np.errstate(invalid="ignore"):
        for a in range(B):
            vfloor = v_best if v_best > 0.0 else 0.0
            if rb[a] <= vfloor:
                continue
            neg = (P[:, a, None] - P[:, a + 1:]) * inv_n
            mask = neg > 0.0
            if not mask.any():
                continue
            q = (Q[:, a + 1:] - Q[:, a, None]) * inv_n
            var = q - neg * neg
            r = np.where(mask, neg / np.sqrt(np.maximum(var, sn2)), -np.inf)
            per_j = r.max(axis=1)
            row_max = float(per_j.max())
            if row_max > v_best:
                j = int(np.argmax(per_j))
                b = a + 1 + int(np.argmax(r[j]))
                v_best, a_best, b_best, j_best = row_max, a, b, j
            if v_best > cap:
                return v_best, a_best, b_best, j_best, True

    return v_best, a_best, b_best, j_best, False
