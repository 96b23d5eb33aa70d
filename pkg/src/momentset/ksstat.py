"""Weighted KS statistic: supremum of studentized sample moments.

The statistic for a parameter value theta is

    T_n(theta) = sup_g S( mu_hat_1 / (sigma_hat_1 v sigma_n), ..., )

where mu_hat_j = E_n[m_j g], sigma_hat_j^2 = E_n[(m_j g)^2] - mu_hat_j^2,
``v`` is the maximum, and sigma_n is a deterministic truncation point
shrinking to zero.  Regions compare sqrt(n/log n) * T_n(theta) against a
slowly increasing critical value.

For the family of all data-interval boxes (d_x = 1) with the sup-norm
criterion the supremum is computed exactly by a prefix-sum scan over all
O(n^2) order-statistic interval pairs (compiled kernel when available);
other families fall back to explicit enumeration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .core import (ConfigError, DegenerateSampleError, Instrument,
                   InstrumentFamily, MomentModel, Sample, SFunction,
                   _atomic_write_text)


# ---------------------------------------------------------------------------
# tuning sequences


@dataclass(frozen=True)
class TuningPolicy:
    """Truncation point and critical value rules.

    sigma_rule 'paper_default' gives sigma_n = scale * sqrt(log n * log log n / n)
    with ``sigma_value`` as the scale (default 0.5, the standard deviation of a
    Bernoulli(1/2) draw); 'fixed' uses ``sigma_value`` as a constant.  c_rule
    'paper_default' gives c_n = 2 sqrt(log log n); 'fixed' uses ``c_value``.
    """

    sigma_rule: str = "paper_default"
    sigma_value: float = 0.5
    c_rule: str = "paper_default"
    c_value: Optional[float] = None

    def __post_init__(self):
        if self.sigma_rule not in ("paper_default", "fixed"):
            raise ConfigError("sigma_rule", f"unknown rule '{self.sigma_rule}'")
        if not (self.sigma_value > 0):
            raise ConfigError("sigma_value", "must be positive")
        if self.c_rule not in ("paper_default", "fixed"):
            raise ConfigError("c_rule", f"unknown rule '{self.c_rule}'")
        if self.c_rule == "fixed" and self.c_value is None:
            raise ConfigError("c_value", "fixed c_rule requires a value")


def sigma_n(policy: TuningPolicy, n: int) -> float:
    """Truncation point for the standard deviation at sample size n."""
    if policy.sigma_rule == "fixed":
        return float(policy.sigma_value)
    if n < 3:
        raise DegenerateSampleError(
            f"sigma_n default rule needs n >= 3 (log log n > 0), got n={n}")
    return policy.sigma_value * math.sqrt(
        math.log(n) * math.log(math.log(n)) / n)


def critical_value(policy: TuningPolicy, n: int) -> float:
    """Critical value c_n at sample size n."""
    if policy.c_rule == "fixed":
        return float(policy.c_value)
    if n < 3:
        raise DegenerateSampleError(
            f"c_n default rule needs n >= 3 (log log n > 0), got n={n}")
    return 2.0 * math.sqrt(math.log(math.log(n)))


def plugin_sd_scale(sample: Sample, model: MomentModel, theta_grid) -> float:
    """Data-driven scale for the truncation point.

    Maximum over grid points theta and components j of the sample standard
    deviation of m_j(W_i, theta).  Returns 0 for degenerate (constant)
    moments; callers should then fall back to the model's moment bound.
    """
    points = np.atleast_2d(np.asarray(
        theta_grid.points() if hasattr(theta_grid, "points") else theta_grid,
        dtype=np.float64))
    if points.size == 0:
        raise ConfigError("grid", "plugin scale needs a nonempty theta grid")
    if sample.n < 2:
        raise DegenerateSampleError("plugin scale needs n >= 2")
    model.validate_sample(sample)
    best = 0.0
    for theta in points:
        z = model.moment_matrix(sample, model.validate_theta(theta))
        best = max(best, float(z.std(axis=0).max()))
    return best


# ---------------------------------------------------------------------------
# sample moments


@dataclass(frozen=True)
class MomentSummary:
    """Per-component sample mean and standard deviation of m_j * g."""

    mu_hat: np.ndarray
    sigma_hat: np.ndarray


def moment_pair(sample: Sample, model: MomentModel, theta,
                g: Instrument) -> MomentSummary:
    """mu_hat and sigma_hat for one instrument (variance clamped at 0)."""
    if sample.n < 1:
        raise DegenerateSampleError("moment_pair needs n >= 1")
    theta = model.validate_theta(theta)
    model.validate_sample(sample)
    z = model.moment_matrix(sample, theta) * g.weights(sample.x)[:, None]
    mu = z.mean(axis=0)
    var = np.maximum((z * z).mean(axis=0) - mu * mu, 0.0)
    return MomentSummary(mu_hat=mu, sigma_hat=np.sqrt(var))


# ---------------------------------------------------------------------------
# the statistic


@dataclass(frozen=True)
class StatResult:
    """Value and argmax information for one evaluation of the statistic.

    ``studentized_min`` is the smallest studentized component at the argmax
    instrument, so t_value = max(-studentized_min, 0) under the sup-norm
    criterion.  ``truncated`` marks early exit at a caller-supplied cap; the
    reported value is then a valid lower bound for the supremum.
    """

    t_value: float
    scaled: float
    argmax_instrument: Instrument
    argmin_component: int
    studentized_min: float
    sigma_used: float
    truncated: bool = False


class IntervalScanContext:
    """Reusable sorted view of a sample for repeated interval scans.

    Sorting and tie-block discovery are O(n log n) once; each theta then
    costs one moment-matrix evaluation plus the prefix-sum scan.
    """

    def __init__(self, sample: Sample, model: MomentModel):
        if sample.d_x != 1:
            raise ConfigError("family", "interval scan requires d_x = 1")
        model.validate_sample(sample)
        order = np.argsort(sample.x[:, 0], kind="stable")
        xs = sample.x[order, 0]
        self.model = model
        self.n = sample.n
        self.xs = xs
        self.sorted_sample = Sample(x=xs[:, None], w=sample.w[order])
        changes = np.flatnonzero(np.diff(xs)) + 1
        self.cuts = np.concatenate([[0], changes, [sample.n]]).astype(np.int64)

    def interval_for(self, a_blk: int, b_blk: int) -> Instrument:
        """Canonical box for prefix-index pair (a, b): blocks a..b-1."""
        s = -np.inf if a_blk == 0 else float(self.xs[self.cuts[a_blk] - 1])
        t = float(self.xs[self.cuts[b_blk] - 1])
        return Instrument(kind="box", s=(s,), t=(t,))

    def scan(self, theta, sn: float, cap: float = np.inf):
        z = self.model.moment_matrix(self.sorted_sample,
                                     self.model.validate_theta(theta))
        prof = _kernels.scan_profile(np.ascontiguousarray(z.T), self.cuts)
        return _kernels.studentized_interval_scan(*prof, self.n, sn, cap=cap)


def _pnorm_interval_sup(ctx: IntervalScanContext, theta, s: SFunction,
                        sn: float, cap: float):
    """Exact interval supremum for finite-p criteria (vectorized per row)."""
    z = ctx.model.moment_matrix(ctx.sorted_sample, ctx.model.validate_theta(theta))
    P, Q, _ = _kernels.scan_profile(np.ascontiguousarray(z.T), ctx.cuts)
    n = ctx.n
    best, best_pair = -np.inf, (0, 1)
    truncated = False
    n_blocks = len(ctx.cuts) - 1
    for a in range(n_blocks):
        mu = (P[:, a + 1:] - P[:, a, None]) / n
        var = (Q[:, a + 1:] - Q[:, a, None]) / n - mu * mu
        stud = mu / np.sqrt(np.maximum(np.maximum(var, 0.0), sn * sn))
        vals = s.value(stud.T)
        b_rel = int(np.argmax(vals))
        if vals[b_rel] > best:
            best = float(vals[b_rel])
            best_pair = (a, a + 1 + b_rel)
        if best >= cap:
            truncated = True
            break
    return best, best_pair, truncated


def _studentize(z: np.ndarray, weights: np.ndarray, sn: float) -> np.ndarray:
    zg = z * weights[:, None]
    mu = zg.mean(axis=0)
    var = np.maximum((zg * zg).mean(axis=0) - mu * mu, 0.0)
    return mu / np.maximum(np.sqrt(var), sn)


def _family_sup(sample: Sample, model: MomentModel, theta, family, s, sn, cap):
    """Generic enumeration path: works for any family and criterion."""
    z = model.moment_matrix(sample, model.validate_theta(theta))
    best, best_g, best_stud = -np.inf, None, None
    truncated = False
    for g in family.instruments(sample):
        stud = _studentize(z, g.weights(sample.x), sn)
        val = float(s.value(stud))
        if val > best:
            best, best_g, best_stud = val, g, stud
        if best >= cap:
            truncated = True
            break
    if best_g is None:
        raise ConfigError("family", "family enumerates no instruments on this data")
    return best, best_g, best_stud, truncated


def ks_statistic(sample: Sample, model: MomentModel, theta,
                 family: InstrumentFamily, s: SFunction,
                 tuning: TuningPolicy, *, cap: Optional[float] = None,
                 _ctx: Optional[IntervalScanContext] = None) -> StatResult:
    """T_n(theta) with argmax bookkeeping.

    ``cap`` (in unscaled t units) permits early exit once the running
    supremum reaches it; the result is flagged ``truncated`` and is a lower
    bound attained by a concrete instrument.
    """
    if sample.n < 2:
        raise DegenerateSampleError(
            f"ks_statistic needs n >= 2 for the variance, got n={sample.n}")
    sn = sigma_n(tuning, sample.n)
    scale = math.sqrt(sample.n / math.log(sample.n))
    cap_val = np.inf if cap is None else float(cap)

    if family.kind == "all_data_intervals":
        ctx = _ctx if _ctx is not None else IntervalScanContext(sample, model)
        if s.kind == "neg_part_sup_norm":
            v, a, b, j, trunc = ctx.scan(theta, sn, cap=cap_val)
            t = max(v, 0.0)
            return StatResult(t_value=t, scaled=scale * t,
                              argmax_instrument=ctx.interval_for(a, b),
                              argmin_component=int(j), studentized_min=-v,
                              sigma_used=sn, truncated=bool(trunc))
        val, (a, b), trunc = _pnorm_interval_sup(ctx, theta, s, sn, cap_val)
        t = max(val, 0.0)
        g = ctx.interval_for(a, b)
        stud = _studentize(ctx.model.moment_matrix(ctx.sorted_sample,
                                                   ctx.model.validate_theta(theta)),
                           g.weights(ctx.sorted_sample.x), sn)
        return StatResult(t_value=t, scaled=scale * t, argmax_instrument=g,
                          argmin_component=int(np.argmin(stud)),
                          studentized_min=float(stud.min()), sigma_used=sn,
                          truncated=trunc)

    model.validate_sample(sample)
    best, g, stud, trunc = _family_sup(sample, model, theta, family, s, sn, cap_val)
    t = max(best, 0.0)
    return StatResult(t_value=t, scaled=scale * t, argmax_instrument=g,
                      argmin_component=int(np.argmin(stud)),
                      studentized_min=float(stud.min()), sigma_used=sn,
                      truncated=trunc)


# ---------------------------------------------------------------------------
# trace export


def _endpoint_cols(g: Instrument):
    if g.kind == "box":
        return (";".join(_num(v) for v in g.s), ";".join(_num(v) for v in g.t))
    lo = ";".join(_num(c - g.bandwidth) for c in g.center)
    hi = ";".join(_num(c + g.bandwidth) for c in g.center)
    return lo, hi


def _num(v: float) -> str:
    if v == np.inf:
        return "inf"
    if v == -np.inf:
        return "-inf"
    return repr(float(v))


def write_stat_trace(path: str, rows) -> None:
    """CSV export of (theta, StatResult) pairs.

    Columns: theta coordinates, t_value, scaled, the argmax instrument's
    lower/upper endpoints (support interval for kernel dilations), and the
    most-violated component index.
    """
    rows = list(rows)
    if not rows:
        raise ConfigError("trace", "no rows to write")
    dim = len(np.atleast_1d(rows[0][0]))
    header = [f"theta{i+1}" for i in range(dim)] + \
        ["t_value", "scaled", "argmax_s", "argmax_t", "argmin_component"]
    lines = [",".join(header)]
    for theta, res in rows:
        lo, hi = _endpoint_cols(res.argmax_instrument)
        vals = [_num(v) for v in np.atleast_1d(theta)]
        vals += [_num(res.t_value), _num(res.scaled), lo, hi,
                 str(res.argmin_component)]
        lines.append(",".join(vals))
    _atomic_write_text(path, "\n".join(lines) + "\n")
