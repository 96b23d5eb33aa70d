"""Competitor region estimators: bounded-weight KS and kernel conditional means.

The bounded-weight statistic drops studentization: it applies the criterion
to omega * mu_hat for a bounded weight function omega (default identically
one) and scales by sqrt(n).  The kernel estimator replaces sample moments
with Nadaraya-Watson conditional mean estimates evaluated at the observed
conditioning points and scales by sqrt(n h^d_x / log n).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .core import (ConfigError, DegenerateSampleError, Instrument,
                   InstrumentFamily, MomentModel, Sample, SFunction,
                   kernel_value)
from .ksstat import IntervalScanContext, StatResult
from .regions import ConfidenceRegion, ThetaGrid, _run_indexed


# ---------------------------------------------------------------------------
# bounded-weight KS


@dataclass(frozen=True)
class BoundedWeightPolicy:
    """Weight function and critical-value rule for the unstudentized statistic.

    ``omega(theta, g, j)`` must take values in [omega_lower, omega_upper]
    with 0 < lower <= upper < inf; omega=None means the constant weight 1.
    The critical value rule must grow without bound but slower than sqrt(n);
    the default is 2 sqrt(log log n).
    """

    omega: Optional[Callable] = None
    omega_lower: float = 1.0
    omega_upper: float = 1.0
    c_rule: str = "paper_default"
    c_value: Optional[float] = None

    def __post_init__(self):
        if not (0.0 < self.omega_lower <= self.omega_upper < np.inf):
            raise ConfigError("omega_lower",
                              "need 0 < omega_lower <= omega_upper < inf")
        if self.c_rule not in ("paper_default", "fixed"):
            raise ConfigError("c_rule", f"unknown rule '{self.c_rule}'")
        if self.c_rule == "fixed" and self.c_value is None:
            raise ConfigError("c_value", "fixed c_rule requires a value")

    def critical_value(self, n: int) -> float:
        if self.c_rule == "fixed":
            return float(self.c_value)
        if n < 3:
            raise DegenerateSampleError("default c rule needs n >= 3")
        return 2.0 * math.sqrt(math.log(math.log(n)))

    def weight(self, theta, g: Instrument, j: int) -> float:
        if self.omega is None:
            return 1.0
        w = float(self.omega(theta, g, j))
        if not (self.omega_lower - 1e-12 <= w <= self.omega_upper + 1e-12):
            raise ConfigError("omega",
                              f"omega value {w} outside declared "
                              f"[{self.omega_lower}, {self.omega_upper}]")
        return w


def bounded_ks_statistic(sample: Sample, model: MomentModel, theta,
                         family: InstrumentFamily, s: SFunction,
                         policy: BoundedWeightPolicy,
                         *, _ctx: Optional[IntervalScanContext] = None) -> StatResult:
    """sup_g S(omega_1 mu_hat_1, ..., omega_d mu_hat_d), scaled by sqrt(n)."""
    if sample.n < 1:
        raise DegenerateSampleError("bounded_ks_statistic needs n >= 1")
    scale = math.sqrt(sample.n)

    if (family.kind == "all_data_intervals" and s.kind == "neg_part_sup_norm"
            and policy.omega is None):
        # omega == 1: sup over intervals of -mu_hat per component is a
        # running-maximum drawdown of the prefix-sum path, O(n) per component.
        ctx = _ctx if _ctx is not None else IntervalScanContext(sample, model)
        z = ctx.model.moment_matrix(ctx.sorted_sample,
                                    ctx.model.validate_theta(theta))
        P, _, _ = _kernels.scan_profile(np.ascontiguousarray(z.T), ctx.cuts)
        v, a, b, j = _kernels.raw_interval_scan(P, ctx.n)
        t = max(v, 0.0)
        return StatResult(t_value=t, scaled=scale * t,
                          argmax_instrument=ctx.interval_for(a, b),
                          argmin_component=int(j), studentized_min=-v,
                          sigma_used=0.0)

    model.validate_sample(sample)
    z = model.moment_matrix(sample, model.validate_theta(theta))
    best, best_g, best_vec = -np.inf, None, None
    for g in family.instruments(sample):
        zg = z * g.weights(sample.x)[:, None]
        mu = zg.mean(axis=0)
        vec = np.array([policy.weight(theta, g, j) * mu[j]
                        for j in range(model.d_y)])
        val = float(s.value(vec))
        if val > best:
            best, best_g, best_vec = val, g, vec
    if best_g is None:
        raise ConfigError("family", "family enumerates no instruments on this data")
    return StatResult(t_value=max(best, 0.0), scaled=scale * max(best, 0.0),
                      argmax_instrument=best_g,
                      argmin_component=int(np.argmin(best_vec)),
                      studentized_min=float(best_vec.min()), sigma_used=0.0)


def bounded_region(sample: Sample, model: MomentModel, grid: ThetaGrid,
                   family: InstrumentFamily, s: SFunction,
                   policy: BoundedWeightPolicy,
                   *, threads: Optional[int] = None) -> ConfidenceRegion:
    """{theta : sqrt(n) T_omega(theta) <= c_n} on the grid."""
    if sample.n < 2:
        raise DegenerateSampleError("bounded_region needs n >= 2")
    c = policy.critical_value(sample.n)
    pts = grid.points()
    stat = np.empty(grid.n_points)

    fast = (family.kind == "all_data_intervals"
            and s.kind == "neg_part_sup_norm" and policy.omega is None)
    ctx = IntervalScanContext(sample, model) if fast else None
    if not fast:
        model.validate_sample(sample)

    def worker(i):
        res = bounded_ks_statistic(sample, model, pts[i], family, s, policy,
                                   _ctx=ctx)
        stat[i] = res.scaled

    _run_indexed(worker, grid.n_points, threads)
    member = stat <= c
    return ConfidenceRegion(grid=grid, member=member, stat=stat, c_used=c,
                            estimator="bounded_ks",
                            meta={"n": sample.n, "scale": math.sqrt(sample.n)})


# ---------------------------------------------------------------------------
# kernel estimator


@dataclass(frozen=True)
class KernelSpec:
    """Kernel id, bandwidth rule, and evaluation-grid strategy.

    h_rule: 'fixed' (h = h_value), 'power' (h = h_value * n^-h_exponent),
    or 'optimal' (h = (log n / n)^(1/(d_x + 2*alpha)) for smoothness alpha).
    ``a_min`` is the lower bound demanded of h^d_x * n / log n; regions
    report the attained value so the side condition is auditable.
    """

    kernel_id: str = "uniform"
    h_rule: str = "optimal"
    h_value: Optional[float] = None
    h_exponent: Optional[float] = None
    alpha: float = 2.0
    a_min: float = 1.0
    x_eval: str = "data"

    def __post_init__(self):
        if self.kernel_id not in ("uniform", "epanechnikov", "triangular"):
            raise ConfigError("kernel_id", f"unknown kernel '{self.kernel_id}'")
        if self.h_rule not in ("fixed", "power", "optimal"):
            raise ConfigError("h_rule", f"unknown bandwidth rule '{self.h_rule}'")
        if self.h_rule == "fixed" and not (self.h_value and self.h_value > 0):
            raise ConfigError("h_value", "fixed rule requires h_value > 0")
        if self.h_rule == "power" and (not self.h_value or self.h_exponent is None):
            raise ConfigError("h_value", "power rule requires h_value and h_exponent")
        if self.h_rule == "optimal" and not (self.alpha > 0):
            raise ConfigError("alpha", "optimal rule requires alpha > 0")
        if self.x_eval != "data":
            raise ConfigError("x_eval", "only the 'data' evaluation grid is provided")

    def bandwidth(self, n: int, d_x: int) -> float:
        if self.h_rule == "fixed":
            return float(self.h_value)
        if self.h_rule == "power":
            return float(self.h_value) * n ** (-float(self.h_exponent))
        if n < 2:
            raise DegenerateSampleError("optimal bandwidth needs n >= 2")
        return (math.log(n) / n) ** (1.0 / (d_x + 2.0 * self.alpha))


def kernel_cond_mean(sample: Sample, model: MomentModel, theta, x,
                     spec: KernelSpec, *, h: Optional[float] = None) -> np.ndarray:
    """Nadaraya-Watson estimate of E[m(W, theta) | X = x] at one point."""
    if sample.n < 1:
        raise DegenerateSampleError("kernel_cond_mean needs n >= 1")
    model.validate_sample(sample)
    if h is None:
        h = spec.bandwidth(sample.n, sample.d_x)
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != sample.d_x:
        raise ConfigError("x", f"evaluation point has dim {x.shape[1]}, "
                               f"data has d_x={sample.d_x}")
    u = (sample.x - x) / h
    w8 = np.prod(kernel_value(spec.kernel_id, u), axis=1)
    denom = w8.sum()
    if denom <= 0.0:
        raise DegenerateSampleError(f"no data within bandwidth {h} of x={x.ravel()}")
    z = model.moment_matrix(sample, model.validate_theta(theta))
    return (z * w8[:, None]).sum(axis=0) / denom


class _KernelEvalContext:
    """Precomputed structures for the sup over data evaluation points.

    Uniform kernel, d_x = 1: window sums via prefix sums over sorted data
    (constant weights cancel in the ratio).  Other kernels: dense weight
    matrix between data and evaluation points, built in column chunks.
    """

    def __init__(self, sample: Sample, model: MomentModel, spec: KernelSpec,
                 h: float):
        model.validate_sample(sample)
        self.model = model
        self.spec = spec
        self.h = h
        self.n = sample.n
        if spec.kernel_id == "uniform" and sample.d_x == 1:
            order = np.argsort(sample.x[:, 0], kind="stable")
            xs = sample.x[order, 0]
            self.sorted_sample = Sample(x=xs[:, None], w=sample.w[order])
            eval_x = np.unique(xs)
            self.lo = np.searchsorted(xs, eval_x - h, side="left")
            self.hi = np.searchsorted(xs, eval_x + h, side="right")
            self.counts = (self.hi - self.lo).astype(np.float64)
            self.mode = "window"
        else:
            self.sorted_sample = sample
            eval_x = np.unique(sample.x, axis=0)
            weights = np.empty((sample.n, eval_x.shape[0]))
            for start in range(0, eval_x.shape[0], 256):
                block = eval_x[start:start + 256]
                u = (sample.x[:, None, :] - block[None, :, :]) / h
                weights[:, start:start + block.shape[0]] = \
                    np.prod(kernel_value(self.spec.kernel_id, u), axis=2)
            self.weights = weights
            self.denom = weights.sum(axis=0)
            keep = self.denom > 0.0
            self.weights = self.weights[:, keep]
            self.denom = self.denom[keep]
            self.mode = "dense"
        self.eval_x = eval_x

    def statistic(self, theta, s: SFunction):
        """(t_value, argmax eval index, estimates at argmax)."""
        z = self.model.moment_matrix(self.sorted_sample,
                                     self.model.validate_theta(theta))
        if self.mode == "window":
            csum = np.vstack([np.zeros((1, z.shape[1])), np.cumsum(z, axis=0)])
            means = (csum[self.hi] - csum[self.lo]) / self.counts[:, None]
        else:
            means = (z.T @ self.weights).T / self.denom[:, None]
        vals = s.value(means)
        idx = int(np.argmax(vals))
        return float(vals[idx]), idx, means[idx]


def kernel_region(sample: Sample, model: MomentModel, grid: ThetaGrid,
                  spec: KernelSpec, s: SFunction,
                  c_n: Optional[float] = None,
                  *, threads: Optional[int] = None) -> ConfidenceRegion:
    """{theta : sqrt(n h^d_x / log n) sup_x S(m_hat(theta, x)) <= c_n}.

    Evaluation points are the observed x values.  The bandwidth must
    satisfy h^d_x * n / log n >= a_min; the attained value is stored in
    the region's meta for auditing.
    """
    if sample.n < 2:
        raise DegenerateSampleError("kernel_region needs n >= 2")
    h = spec.bandwidth(sample.n, sample.d_x)
    side = h ** sample.d_x * sample.n / math.log(sample.n)
    if side < spec.a_min:
        raise ConfigError("h_rule",
                          f"bandwidth side condition violated: "
                          f"h^d_x n/log n = {side:.4f} < a_min = {spec.a_min}")
    if c_n is None:
        if sample.n < 3:
            raise DegenerateSampleError("default c rule needs n >= 3")
        c_n = 2.0 * math.sqrt(math.log(math.log(sample.n)))
    scale = math.sqrt(sample.n * h ** sample.d_x / math.log(sample.n))

    ctx = _KernelEvalContext(sample, model, spec, h)
    pts = grid.points()
    stat = np.empty(grid.n_points)

    def worker(i):
        t, _, _ = ctx.statistic(pts[i], s)
        stat[i] = scale * t

    _run_indexed(worker, grid.n_points, threads)
    member = stat <= c_n
    meta = {"n": sample.n, "h": h, "side_condition": side, "scale": scale,
            "kernel_id": spec.kernel_id}
    return ConfidenceRegion(grid=grid, member=member, stat=stat, c_used=float(c_n),
                            estimator="kernel", meta=meta)
