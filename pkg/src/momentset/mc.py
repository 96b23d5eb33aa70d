"""Simulation harness: data-generating processes, identified-set oracles,
replication loops, rate experiments, and the truncation diagnostic.

Bundled DGPs
------------
median_missing
    x ~ unif(-3,3); latent outcome w* = 1/4 + x/2 + u with u ~ unif(-1,1);
    the outcome goes missing with probability p(x) = 1/5 - x^2/20 + x^4/200,
    in which case (w_l, w_h) = (-inf, +inf).  Median regression with
    interval-censored outcome; the identified set is the set of lines lying
    between the two conditional median bands.
contact_set
    x ~ unif(0,1); w = theta*_1 + noise with standard normal noise; the
    conditional moment holds with equality on the whole support at the
    truth, the regime where shrinking the truncation point changes the
    statistic's growth rate.
slope_counterexample
    x ~ unif(-1/2,1/2); E[w_h|x] = x^2, E[w_l|x] = -x^2, unit-variance
    Gaussian noise; intercept pinned at 0 so only the slope is estimated.
    The identified set is the single point 0 with a quadratic contact.
selection_tails(phi_m, phi_x, at)
    Mean of an outcome observed with probability approaching 1 near a
    support boundary of x (at='finite': endpoint x=1 with selection
    1 - (1-x)^phi_m / 2 and x-density ~ (1-x)^phi_x; at='infinity':
    Pareto-tailed x >= 1 with selection 1 - x^-phi_m / 2).  Outcomes are
    uniform on [0,1], so the point-identification limit is 1/2.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import spearmanr

from . import __version__
from .alt import BoundedWeightPolicy, KernelSpec, bounded_region, kernel_region
from .core import (ConfigError, DomainError, InstrumentFamily, MomentModel,
                   MomentSetError, Sample, SFunction, _atomic_write_text)
from .ksstat import TuningPolicy, critical_value, ks_statistic
from .models import ModelSpec, build_model, selection_sample
from .regions import ConfidenceRegion, ThetaGrid, confidence_region, hausdorff

_DGP_KINDS = ("median_missing", "contact_set", "slope_counterexample",
              "selection_tails")
_ESTIMATORS = ("weighted_ks", "bounded_ks", "kernel")
QUANTILES = (0.25, 0.5, 0.75, 0.9, 0.95)


@dataclass(frozen=True)
class DgpSpec:
    """A bundled data-generating process; see the module docstring."""

    kind: str
    true_theta: tuple
    phi_m: Optional[float] = None
    phi_x: Optional[float] = None
    at: Optional[str] = None

    def __post_init__(self):
        if self.kind not in _DGP_KINDS:
            raise ConfigError("kind", f"unknown DGP kind '{self.kind}'")
        if self.kind == "selection_tails":
            if self.at not in ("finite", "infinity"):
                raise ConfigError("at", "selection_tails needs at in {finite, infinity}")
            if self.phi_m is None or not (self.phi_m > 0):
                raise ConfigError("phi_m", "selection_tails needs phi_m > 0")
            need = -1.0 if self.at == "finite" else 1.0
            if self.phi_x is None or not (self.phi_x > need):
                raise ConfigError("phi_x", f"need phi_x > {need} for at={self.at}")


def median_missing() -> DgpSpec:
    return DgpSpec(kind="median_missing", true_theta=(0.25, 0.5))


def contact_set() -> DgpSpec:
    return DgpSpec(kind="contact_set", true_theta=(0.0, 0.0))


def slope_counterexample() -> DgpSpec:
    return DgpSpec(kind="slope_counterexample", true_theta=(0.0, 0.0))


def selection_tails(phi_m: float, phi_x: float, at: str) -> DgpSpec:
    return DgpSpec(kind="selection_tails", true_theta=(0.5,),
                   phi_m=phi_m, phi_x=phi_x, at=at)


# ---------------------------------------------------------------------------
# sampling


def replication_rng(base_seed: int, n: int, rep: int,
                    stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (base_seed, n, rep, stream).

    Distinct key tuples give independent streams regardless of the order in
    which replications run, so parallel schedules reproduce serial output.
    """
    mask = (1 << 64) - 1
    key = np.array([base_seed & mask,
                    ((n << 32) ^ (rep << 8) ^ stream) & mask],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def missing_probability(x):
    """Missingness probability of the median_missing design."""
    x = np.asarray(x, dtype=np.float64)
    return 0.2 - x ** 2 / 20.0 + x ** 4 / 200.0


def median_bands(x):
    """Conditional medians (q_l, q_h) of (w_l, w_h) for median_missing.

    With missing mass p stacked at -inf (for w_l) or +inf (for w_h), the
    uniform(-1,1) noise CDF inverts in closed form:
    q_h = mu - 1 + 1/(1-p), q_l = mu - 1 + (1-2p)/(1-p), mu = 1/4 + x/2.
    """
    x = np.asarray(x, dtype=np.float64)
    if (np.abs(x) > 3).any():
        bad = np.argwhere(np.atleast_1d(np.abs(x) > 3))
        raise DomainError("median_bands defined on [-3, 3]", row=int(bad[0][0]))
    p = missing_probability(x)
    mu = 0.25 + 0.5 * x
    return mu - 1.0 + (1.0 - 2.0 * p) / (1.0 - p), mu - 1.0 + 1.0 / (1.0 - p)


def _selection_prob(dgp: DgpSpec, x: np.ndarray) -> np.ndarray:
    if dgp.at == "finite":
        return 1.0 - 0.5 * (1.0 - x) ** dgp.phi_m
    return 1.0 - 0.5 * x ** (-dgp.phi_m)


def simulate(dgp: DgpSpec, n: int, seed: int, rep: int = 0,
             stream: int = 0) -> Sample:
    """Draw a sample of size n; deterministic in (dgp, n, seed, rep, stream)."""
    if n < 0:
        raise ConfigError("n", "sample size must be >= 0")
    rng = replication_rng(seed, n, rep, stream)
    if dgp.kind == "median_missing":
        x = rng.uniform(-3.0, 3.0, n)
        u = rng.uniform(-1.0, 1.0, n)
        w_star = 0.25 + 0.5 * x + u
        miss = rng.random(n) < missing_probability(x)
        w_l = np.where(miss, -np.inf, w_star)
        w_h = np.where(miss, np.inf, w_star)
        return Sample(x=x[:, None], w=np.column_stack([x, w_l, w_h]))
    if dgp.kind == "contact_set":
        x = rng.uniform(0.0, 1.0, n)
        w = dgp.true_theta[0] + rng.standard_normal(n)
        return Sample(x=x[:, None], w=np.column_stack([x, w]))
    if dgp.kind == "slope_counterexample":
        x = rng.uniform(-0.5, 0.5, n)
        w_h = x ** 2 + rng.standard_normal(n)
        w_l = -x ** 2 + rng.standard_normal(n)
        return Sample(x=x[:, None], w=np.column_stack([x, w_l, w_h]))
    # selection_tails
    u = rng.random(n)
    if dgp.at == "finite":
        x = 1.0 - u ** (1.0 / (dgp.phi_x + 1.0))
    else:
        x = u ** (-1.0 / (dgp.phi_x - 1.0))
    y = rng.random(n)
    observed = rng.random(n) < _selection_prob(dgp, x)
    return selection_sample(x[:, None], y, observed, 0.0, 1.0)


def model_for(dgp: DgpSpec, theta_box=None) -> MomentModel:
    """The moment model matching a DGP's sample layout."""
    if dgp.kind == "median_missing":
        box = theta_box or ((-5.0, 5.0), (-5.0, 5.0))
        return build_model(ModelSpec(kind="interval_quantile", d_x=1, tau=0.5,
                                     theta_box=box))
    if dgp.kind == "contact_set":
        box = theta_box or ((-5.0, 5.0), (-5.0, 5.0))
        return build_model(ModelSpec(kind="one_sided_regression", d_x=1,
                                     theta_box=box))
    if dgp.kind == "slope_counterexample":
        box = theta_box or ((0.0, 0.0), (-2.0, 2.0))
        return build_model(ModelSpec(kind="interval_regression", d_x=1,
                                     theta_box=box))
    box = theta_box or ((0.0, 1.0),)
    return build_model(ModelSpec(kind="selection", theta_box=box,
                                 y_lower=0.0, y_upper=1.0))


# ---------------------------------------------------------------------------
# identified-set oracles


@dataclass(frozen=True)
class IdentifiedSetOracle:
    """Closed-form identified set restricted to a grid."""

    grid: ThetaGrid
    mask: np.ndarray
    hulls: tuple
    x_check_count: int

    def points(self) -> np.ndarray:
        return self.grid.points()[self.mask]

    @property
    def n_members(self) -> int:
        return int(self.mask.sum())

    def contains(self, theta) -> bool:
        pts = self.grid.points()
        theta = np.asarray(theta, dtype=np.float64).reshape(1, -1)
        hit = np.flatnonzero((np.abs(pts - theta) < 1e-9).all(axis=1))
        return bool(hit.size and self.mask[hit[0]])


def _band_member_mask(pts: np.ndarray, xg: np.ndarray, lo: np.ndarray,
                      hi: np.ndarray) -> np.ndarray:
    """Lines theta_1 + theta_2 x inside [lo(x), hi(x)] at every checked x."""
    mask = np.empty(pts.shape[0], dtype=bool)
    design = np.vstack([np.ones_like(xg), xg])
    for start in range(0, pts.shape[0], 4096):
        block = pts[start:start + 4096]
        lines = block @ design
        ok = (lines >= lo[None, :]) & (lines <= hi[None, :])
        mask[start:start + block.shape[0]] = ok.all(axis=1)
    return mask


def oracle_set(dgp: DgpSpec, grid: ThetaGrid,
               x_check_count: int = 1201) -> IdentifiedSetOracle:
    """Grid restriction of the closed-form identified set.

    Band conditions are checked on a dense x grid (uniform over the support,
    quantile-spaced for the unbounded selection design) rather than through
    analytic tangency algebra; the default 1201 points keep the band-check
    error well below the 0.005 parameter pitch for the bundled designs.
    """
    if x_check_count < 2:
        raise ConfigError("x_check_count", "need at least 2 check points")
    pts = grid.points()
    if dgp.kind == "median_missing":
        xg = np.linspace(-3.0, 3.0, x_check_count)
        q_l, q_h = median_bands(xg)
        mask = _band_member_mask(pts, xg, q_l, q_h)
    elif dgp.kind == "contact_set":
        xg = np.linspace(0.0, 1.0, x_check_count)
        lo = np.full_like(xg, -np.inf)
        mask = _band_member_mask(pts, xg, lo, np.zeros_like(xg) + dgp.true_theta[0])
    elif dgp.kind == "slope_counterexample":
        xg = np.linspace(-0.5, 0.5, x_check_count)
        mask = _band_member_mask(pts, xg, -xg ** 2, xg ** 2)
    else:
        if dgp.at == "finite":
            xg = np.linspace(0.0, 1.0, x_check_count)
        else:
            u = np.linspace(0.0, 1.0 - 1.0 / x_check_count, x_check_count)
            xg = (1.0 - u) ** (-1.0 / (dgp.phi_x - 1.0))
        p = _selection_prob(dgp, xg)
        gamma_lo, gamma_hi = 0.5 * p.max(), 1.0 - 0.5 * p.max()
        mask = (pts[:, 0] >= gamma_lo - 1e-12) & (pts[:, 0] <= gamma_hi + 1e-12)
    hulls = []
    member_pts = pts[mask]
    for axis in range(grid.dim):
        if member_pts.shape[0] == 0:
            hulls.append(None)
        else:
            col = member_pts[:, axis]
            hulls.append((float(col.min()), float(col.max())))
    return IdentifiedSetOracle(grid=grid, mask=mask, hulls=tuple(hulls),
                               x_check_count=x_check_count)


# ---------------------------------------------------------------------------
# designs and reports


@dataclass(frozen=True)
class McDesign:
    dgp: DgpSpec
    grid: ThetaGrid
    sizes: tuple
    reps: int
    base_seed: int = 0
    estimators: tuple = ("weighted_ks",)
    tuning: TuningPolicy = field(default_factory=TuningPolicy)
    s: SFunction = field(default_factory=SFunction)
    family: InstrumentFamily = field(
        default_factory=lambda: InstrumentFamily(kind="all_data_intervals"))
    kernel: KernelSpec = field(default_factory=KernelSpec)
    bounded: BoundedWeightPolicy = field(default_factory=BoundedWeightPolicy)
    x_check_count: int = 1201

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError("reps", "need reps >= 1")
        if not self.sizes:
            raise ConfigError("sizes", "need at least one sample size")
        for est in self.estimators:
            if est not in _ESTIMATORS:
                raise ConfigError("estimators", f"unknown estimator '{est}'")
        if not self.estimators:
            raise ConfigError("estimators", "need at least one estimator")


@dataclass(frozen=True)
class RepRecord:
    estimator: str
    n: int
    rep: int
    covered: bool
    empty: bool
    clipped: bool
    d_h: float
    axis_d: tuple
    hull_lo: tuple
    hull_hi: tuple
    seconds: float


@dataclass(frozen=True)
class McCell:
    """Aggregates for one (estimator, n) pair."""

    estimator: str
    n: int
    coverage: float
    dh_q: dict
    axis_dh_q: tuple
    hull_lo_q: tuple
    hull_hi_q: tuple
    frac_lo_positive: tuple
    n_ok: int
    n_failed: int
    n_empty: int
    n_clipped: int
    mean_seconds: float


@dataclass(frozen=True)
class McReport:
    design: dict
    cells: tuple
    oracle_hulls: tuple
    version: str = __version__
    records: tuple = ()

    def cell(self, estimator: str, n: int) -> McCell:
        for c in self.cells:
            if c.estimator == estimator and c.n == n:
                return c
        raise KeyError((estimator, n))


def _build_region(est: str, sample: Sample, model: MomentModel,
                  design: McDesign, threads) -> ConfidenceRegion:
    if est == "weighted_ks":
        return confidence_region(sample, model, design.grid, design.family,
                                 design.s, design.tuning, threads=threads)
    if est == "bounded_ks":
        return bounded_region(sample, model, design.grid, design.family,
                              design.s, design.bounded, threads=threads)
    return kernel_region(sample, model, design.grid, design.kernel, design.s,
                         threads=threads)


def _measure(region: ConfidenceRegion, oracle: IdentifiedSetOracle,
             est: str, n: int, rep: int, seconds: float) -> RepRecord:
    grid = region.grid
    member_pts = region.member_points()
    covered = bool(region.member[oracle.mask].all())
    empty = member_pts.shape[0] == 0
    d_h = hausdorff(member_pts, oracle.points()).d_h
    axis_d, hull_lo, hull_hi = [], [], []
    clipped = False
    for axis in range(grid.dim):
        if empty:
            axis_d.append(np.inf)
            hull_lo.append(np.nan)
            hull_hi.append(np.nan)
            continue
        vals = np.unique(member_pts[:, axis])
        ovals = np.unique(oracle.points()[:, axis])
        axis_d.append(hausdorff(vals, ovals).d_h)
        hull_lo.append(float(vals[0]))
        hull_hi.append(float(vals[-1]))
        ax = grid.axes[axis]
        if ax.size > 1 and (vals[0] <= ax[0] or vals[-1] >= ax[-1]):
            clipped = True
    return RepRecord(estimator=est, n=n, rep=rep, covered=covered, empty=empty,
                     clipped=clipped, d_h=float(d_h), axis_d=tuple(axis_d),
                     hull_lo=tuple(hull_lo), hull_hi=tuple(hull_hi),
                     seconds=seconds)


def _quantile_dict(values: np.ndarray) -> dict:
    if values.size == 0:
        return {q: np.nan for q in QUANTILES}
    return {q: float(np.quantile(values, q)) for q in QUANTILES}


def _aggregate(records, est: str, n: int, n_failed: int, dim: int) -> McCell:
    recs = [r for r in records if r.estimator == est and r.n == n]
    n_ok = len(recs)
    cov = float(np.mean([r.covered for r in recs])) if recs else np.nan
    dh = np.array([r.d_h for r in recs])
    axis_q, lo_q, hi_q, frac_pos = [], [], [], []
    for axis in range(dim):
        axis_q.append(_quantile_dict(np.array([r.axis_d[axis] for r in recs])))
        lo = np.array([r.hull_lo[axis] for r in recs])
        hi = np.array([r.hull_hi[axis] for r in recs])
        keep = ~np.isnan(lo)
        lo_q.append(_quantile_dict(lo[keep]))
        hi_q.append(_quantile_dict(hi[keep]))
        frac_pos.append(float((lo[keep] > 0).mean()) if keep.any() else np.nan)
    return McCell(estimator=est, n=n, coverage=cov, dh_q=_quantile_dict(dh),
                  axis_dh_q=tuple(axis_q), hull_lo_q=tuple(lo_q),
                  hull_hi_q=tuple(hi_q), frac_lo_positive=tuple(frac_pos),
                  n_ok=n_ok, n_failed=n_failed,
                  n_empty=sum(r.empty for r in recs),
                  n_clipped=sum(r.clipped for r in recs),
                  mean_seconds=float(np.mean([r.seconds for r in recs]))
                  if recs else np.nan)


def run_mc(design: McDesign, threads: Optional[int] = None,
           progress: bool = False, keep_records: bool = True) -> McReport:
    """Run the full replication loop and aggregate the report.

    Replications use independent counter-based streams keyed by
    (base_seed, n, rep), so the report is reproducible bit-for-bit for a
    fixed design regardless of thread count.  A replication that raises a
    library error is recorded as failed and excluded from the aggregates.
    """
    oracle = oracle_set(design.dgp, design.grid, design.x_check_count)
    if oracle.n_members == 0:
        raise ConfigError("grid", "oracle set has no grid points; widen the grid "
                                  "or refine the pitch")
    box = tuple((float(a[0]) - 1.0, float(a[-1]) + 1.0) for a in design.grid.axes)
    model = model_for(design.dgp, theta_box=box)
    records, failures = [], {}
    for n in design.sizes:
        for rep in range(design.reps):
            sample = simulate(design.dgp, n, design.base_seed, rep)
            for est in design.estimators:
                start = time.perf_counter()
                try:
                    region = _build_region(est, sample, model, design, threads)
                except MomentSetError:
                    failures[(est, n)] = failures.get((est, n), 0) + 1
                    continue
                records.append(_measure(region, oracle, est, n, rep,
                                        time.perf_counter() - start))
            if progress and (rep + 1) % 25 == 0:
                done = [f"{r.d_h:.3f}" for r in records[-len(design.estimators):]]
                print(f"  n={n} rep {rep + 1}/{design.reps} latest d_H {done}",
                      flush=True)
    cells = [_aggregate(records, est, n, failures.get((est, n), 0),
                        design.grid.dim)
             for est in design.estimators for n in design.sizes]
    return McReport(design=design_to_json(design), cells=tuple(cells),
                    oracle_hulls=oracle.hulls,
                    records=tuple(records) if keep_records else ())


# ---------------------------------------------------------------------------
# rate experiment and truncation diagnostic


@dataclass(frozen=True)
class RateReport:
    sizes: tuple
    medians: tuple
    exponent: float
    exponent_plain: float
    predicted_exponent: float
    factors_observed: tuple
    factors_predicted: tuple
    excluded_sizes: tuple
    report: McReport


def rate_experiment(design: McDesign, sizes=None, alpha: float = 2.0) -> RateReport:
    """Fit the distance-shrink rate across sample sizes.

    Regresses log median-d_H on log(c_n^2 log n / n) (and, secondarily, on
    log(log n / n)); also reports consecutive observed shrink factors next
    to the ones predicted by exponent alpha/(d_x + 2 alpha).
    """
    sizes = tuple(sizes) if sizes is not None else tuple(design.sizes)
    if len(sizes) < 3:
        raise ConfigError("sizes", "rate experiment needs at least 3 sizes")
    base = McDesign(dgp=design.dgp, grid=design.grid, sizes=sizes,
                    reps=design.reps, base_seed=design.base_seed,
                    estimators=(design.estimators[0],), tuning=design.tuning,
                    s=design.s, family=design.family, kernel=design.kernel,
                    bounded=design.bounded, x_check_count=design.x_check_count)
    report = run_mc(base)
    est = base.estimators[0]
    med = {n: report.cell(est, n).dh_q[0.5] for n in sizes}
    usable = [n for n in sizes if np.isfinite(med[n]) and med[n] > 0]
    excluded = tuple(n for n in sizes if n not in usable)
    if len(usable) < 2:
        raise ConfigError("sizes", "fewer than 2 sizes with positive finite "
                                   "median distances")
    c2logn = np.array([critical_value(design.tuning, n) ** 2 * math.log(n) / n
                       for n in usable])
    plain = np.array([math.log(n) / n for n in usable])
    y = np.log([med[n] for n in usable])
    expo = float(np.polyfit(np.log(c2logn), y, 1)[0])
    expo_plain = float(np.polyfit(np.log(plain), y, 1)[0])
    pred_expo = alpha / (1.0 + 2.0 * alpha)
    obs, pred = [], []
    for a, b in zip(usable[:-1], usable[1:]):
        obs.append(med[b] / med[a])
        ra = critical_value(design.tuning, a) ** 2 * math.log(a) / a
        rb = critical_value(design.tuning, b) ** 2 * math.log(b) / b
        pred.append((rb / ra) ** pred_expo)
    return RateReport(sizes=tuple(usable), medians=tuple(med[n] for n in usable),
                      exponent=expo, exponent_plain=expo_plain,
                      predicted_exponent=pred_expo,
                      factors_observed=tuple(obs), factors_predicted=tuple(pred),
                      excluded_sizes=excluded, report=report)


@dataclass(frozen=True)
class DivergenceReport:
    sizes: tuple
    medians: tuple
    trend: float
    sigma_rule: str


def divergence_diagnostic(dgp: DgpSpec, sizes, reps: int,
                          tuning: Optional[TuningPolicy] = None,
                          base_seed: int = 0, theta=None) -> DivergenceReport:
    """Median of sqrt(n) T_n at a boundary point, per sample size.

    With the default shrinking truncation point the medians grow without
    bound when the conditional moment binds on a positive-measure x set;
    with a fixed truncation they stabilize.  ``trend`` is the Spearman
    correlation between n and the medians (+1 = strictly increasing).
    """
    tuning = tuning or TuningPolicy()
    sizes = tuple(sizes)
    if not sizes or reps < 1:
        raise ConfigError("sizes", "need nonempty sizes and reps >= 1")
    theta = tuple(theta) if theta is not None else dgp.true_theta
    model = model_for(dgp)
    family = InstrumentFamily(kind="all_data_intervals")
    s = SFunction()
    medians = []
    for n in sizes:
        vals = np.empty(reps)
        for rep in range(reps):
            sample = simulate(dgp, n, base_seed, rep, stream=1)
            res = ks_statistic(sample, model, theta, family, s, tuning)
            vals[rep] = math.sqrt(n) * res.t_value
        medians.append(float(np.median(vals)))
    if len(sizes) < 2 or len(set(medians)) < 2:
        trend = float("nan")
    else:
        trend = float(spearmanr(np.asarray(sizes, dtype=float),
                                np.asarray(medians)).statistic)
    rule = (f"fixed({tuning.sigma_value})" if tuning.sigma_rule == "fixed"
            else f"paper_default(scale={tuning.sigma_value})")
    return DivergenceReport(sizes=sizes, medians=tuple(medians), trend=trend,
                            sigma_rule=rule)


# ---------------------------------------------------------------------------
# serialization and table writers


def dgp_to_json(dgp: DgpSpec) -> dict:
    out = {"kind": dgp.kind, "true_theta": list(dgp.true_theta)}
    for key in ("phi_m", "phi_x", "at"):
        val = getattr(dgp, key)
        if val is not None:
            out[key] = val
    return out


def dgp_from_json(obj: dict) -> DgpSpec:
    allowed = ("kind", "true_theta", "phi_m", "phi_x", "at")
    for key in obj:
        if key not in allowed:
            raise ConfigError(key, "unknown DGP field")
    if "kind" not in obj:
        raise ConfigError("kind", "dgp config requires 'kind'")
    kwargs = dict(obj)
    kind = kwargs["kind"]
    if "true_theta" in kwargs:
        kwargs["true_theta"] = tuple(kwargs["true_theta"])
    else:
        defaults = {"median_missing": (0.25, 0.5), "contact_set": (0.0, 0.0),
                    "slope_counterexample": (0.0, 0.0),
                    "selection_tails": (0.5,)}
        if kind not in defaults:
            raise ConfigError("kind", f"unknown DGP kind '{kind}'")
        kwargs["true_theta"] = defaults[kind]
    return DgpSpec(**kwargs)


def tuning_to_json(t: TuningPolicy) -> dict:
    out = {"sigma_rule": t.sigma_rule, "sigma_value": t.sigma_value,
           "c_rule": t.c_rule}
    if t.c_value is not None:
        out["c_value"] = t.c_value
    return out


def tuning_from_json(obj: dict) -> TuningPolicy:
    allowed = ("sigma_rule", "sigma_value", "c_rule", "c_value")
    for key in obj:
        if key not in allowed:
            raise ConfigError(key, "unknown tuning field")
    return TuningPolicy(**obj)


def _family_to_json(family: InstrumentFamily) -> dict:
    out = {"kind": family.kind}
    if family.thinning is not None:
        out["thinning"] = family.thinning
    if family.centers is not None:
        out["centers"] = [list(np.atleast_1d(c)) for c in family.centers]
        out["bandwidths"] = list(family.bandwidths)
        out["kernel_id"] = family.kernel_id
    return out


def _family_from_json(obj: dict) -> InstrumentFamily:
    kwargs = dict(obj)
    if "centers" in kwargs:
        kwargs["centers"] = tuple(tuple(c) if isinstance(c, (list, tuple))
                                  else (c,) for c in kwargs["centers"])
        kwargs["bandwidths"] = tuple(kwargs["bandwidths"])
    return InstrumentFamily(**kwargs)


def design_to_json(design: McDesign) -> dict:
    return {"schema_version": 1,
            "dgp": dgp_to_json(design.dgp),
            "grid": design.grid.to_json(),
            "sizes": list(design.sizes),
            "reps": design.reps,
            "base_seed": design.base_seed,
            "estimators": list(design.estimators),
            "tuning": tuning_to_json(design.tuning),
            "s": {"kind": design.s.kind,
                  **({"p": design.s.p} if design.s.kind == "neg_part_p_norm"
                     else {})},
            "family": _family_to_json(design.family),
            "kernel": {"kernel_id": design.kernel.kernel_id,
                       "h_rule": design.kernel.h_rule,
                       "h_value": design.kernel.h_value,
                       "h_exponent": design.kernel.h_exponent,
                       "alpha": design.kernel.alpha,
                       "a_min": design.kernel.a_min},
            "bounded": {"c_rule": design.bounded.c_rule,
                        "c_value": design.bounded.c_value},
            "x_check_count": design.x_check_count}


def design_from_json(obj: dict) -> McDesign:
    allowed = ("schema_version", "dgp", "grid", "sizes", "reps", "base_seed",
               "estimators", "tuning", "s", "family", "kernel", "bounded",
               "x_check_count")
    for key in obj:
        if key not in allowed:
            raise ConfigError(key, "unknown design field")
    for key in ("dgp", "grid", "sizes", "reps"):
        if key not in obj:
            raise ConfigError(key, "design config requires this field")
    kwargs = {"dgp": dgp_from_json(obj["dgp"]),
              "grid": ThetaGrid.from_json(obj["grid"]),
              "sizes": tuple(int(n) for n in obj["sizes"]),
              "reps": int(obj["reps"]),
              "base_seed": int(obj.get("base_seed", 0))}
    if "estimators" in obj:
        kwargs["estimators"] = tuple(obj["estimators"])
    if "tuning" in obj:
        kwargs["tuning"] = tuning_from_json(obj["tuning"])
    if "s" in obj:
        kwargs["s"] = SFunction(**obj["s"])
    if "family" in obj:
        kwargs["family"] = _family_from_json(obj["family"])
    if "kernel" in obj:
        clean = {k: v for k, v in obj["kernel"].items() if v is not None}
        kwargs["kernel"] = KernelSpec(**clean)
    if "bounded" in obj:
        clean = {k: v for k, v in obj["bounded"].items() if v is not None}
        kwargs["bounded"] = BoundedWeightPolicy(**clean)
    if "x_check_count" in obj:
        kwargs["x_check_count"] = int(obj["x_check_count"])
    return McDesign(**kwargs)


def _qcols(qd: dict) -> list:
    return [f"{qd[q]:.6g}" for q in QUANTILES]


def write_distance_table(path: str, report: McReport) -> None:
    """Distance quantiles and coverage: one row per (estimator, n)."""
    lines = ["estimator,n,q25,q50,q75,q90,q95,coverage"]
    for c in report.cells:
        lines.append(",".join([c.estimator, str(c.n), *_qcols(c.dh_q),
                               f"{c.coverage:.6g}"]))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_axis_table(path: str, report: McReport) -> None:
    """Per-axis projection distance quantiles."""
    lines = ["estimator,n,axis,q25,q50,q75,q90,q95"]
    for c in report.cells:
        for axis, qd in enumerate(c.axis_dh_q):
            lines.append(",".join([c.estimator, str(c.n), str(axis + 1),
                                   *_qcols(qd)]))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_hull_table(path: str, report: McReport) -> None:
    """Projection hull endpoint quantiles plus the positive-lower fraction."""
    lines = ["estimator,n,axis,bound,q25,q50,q75,q90,q95,frac_positive"]
    for c in report.cells:
        for axis in range(len(c.hull_lo_q)):
            lines.append(",".join([c.estimator, str(c.n), str(axis + 1), "lower",
                                   *_qcols(c.hull_lo_q[axis]),
                                   f"{c.frac_lo_positive[axis]:.6g}"]))
            lines.append(",".join([c.estimator, str(c.n), str(axis + 1), "upper",
                                   *_qcols(c.hull_hi_q[axis]), ""]))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_manifest(path: str, report: McReport) -> None:
    """JSON manifest: design, oracle hulls, software version, cell summaries."""
    cells = []
    for c in report.cells:
        cells.append({"estimator": c.estimator, "n": c.n,
                      "coverage": c.coverage,
                      "dh_q": {str(q): v for q, v in c.dh_q.items()},
                      "n_ok": c.n_ok, "n_failed": c.n_failed,
                      "n_empty": c.n_empty, "n_clipped": c.n_clipped,
                      "mean_seconds": c.mean_seconds})
    body = {"version": report.version, "design": report.design,
            "oracle_hulls": [list(h) if h else None for h in report.oracle_hulls],
            "cells": cells}
    _atomic_write_text(path, json.dumps(body, indent=2) + "\n")


def write_per_rep(path: str, report: McReport) -> None:
    """Audit CSV: one row per (estimator, n, rep)."""
    if not report.records:
        raise ConfigError("records", "report was built with keep_records=False")
    dim = len(report.records[0].axis_d)
    header = ["estimator", "n", "rep", "covered", "empty", "clipped", "d_h"]
    header += [f"axis{k+1}_d" for k in range(dim)]
    header += [f"axis{k+1}_lo" for k in range(dim)]
    header += [f"axis{k+1}_hi" for k in range(dim)]
    header.append("seconds")
    lines = [",".join(header)]
    for r in report.records:
        row = [r.estimator, str(r.n), str(r.rep), str(int(r.covered)),
               str(int(r.empty)), str(int(r.clipped)), f"{r.d_h:.9g}"]
        row += [f"{v:.9g}" for v in r.axis_d]
        row += [f"{v:.9g}" for v in r.hull_lo]
        row += [f"{v:.9g}" for v in r.hull_hi]
        row.append(f"{r.seconds:.4f}")
        lines.append(",".join(row))
    _atomic_write_text(path, "\n".join(lines) + "\n")
