"""Confidence regions on parameter grids and set geometry utilities."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .core import (ConfigError, DegenerateSampleError, InstrumentFamily,
                   MomentModel, Sample, SFunction, _atomic_write_text)
from .ksstat import (IntervalScanContext, TuningPolicy, critical_value,
                     ks_statistic, sigma_n)


@dataclass(frozen=True)
class ThetaGrid:
    """Rectangular grid: the cartesian product of per-axis breakpoints."""

    axes: tuple

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=np.float64).reshape(-1) for a in self.axes)
        if not axes:
            raise ConfigError("grid", "grid needs at least one axis")
        for a in axes:
            if a.size == 0:
                raise ConfigError("grid", "empty grid axis")
            if a.size > 1 and not (np.diff(a) > 0).all():
                raise ConfigError("grid", "axis breakpoints must be strictly increasing")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def from_pitch(cls, box, pitch: float) -> "ThetaGrid":
        """Axis values at integer multiples of ``pitch`` inside ``box``.

        A zero-width axis (lo == hi) becomes the single pinned value.
        Alignment to multiples makes grids over different boxes share
        coordinates, so oracle sets and regions land on identical points.
        """
        if not (pitch > 0):
            raise ConfigError("pitch", "pitch must be positive")
        axes = []
        for lo, hi in np.asarray(box, dtype=np.float64).reshape(-1, 2):
            if hi < lo:
                raise ConfigError("grid", f"axis range [{lo}, {hi}] is empty")
            if hi == lo:
                axes.append(np.array([lo]))
                continue
            k0 = math.ceil((lo - 1e-9) / pitch)
            k1 = math.floor((hi + 1e-9) / pitch)
            if k1 < k0:
                raise ConfigError("pitch", f"no multiple of {pitch} in [{lo}, {hi}]")
            axes.append(np.round(np.arange(k0, k1 + 1) * pitch, 12))
        return cls(axes=tuple(axes))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(len(a) for a in self.axes)

    @property
    def n_points(self) -> int:
        return int(np.prod([len(a) for a in self.axes]))

    def points(self) -> np.ndarray:
        """All grid points, shape (n_points, dim), first axis slowest."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.column_stack([m.reshape(-1) for m in mesh])

    def to_json(self) -> dict:
        return {"axes": [a.tolist() for a in self.axes]}

    @classmethod
    def from_json(cls, obj: dict) -> "ThetaGrid":
        if "axes" in obj:
            return cls(axes=tuple(np.asarray(a) for a in obj["axes"]))
        if "box" in obj and "pitch" in obj:
            return cls.from_pitch(obj["box"], float(obj["pitch"]))
        raise ConfigError("grid", "grid config needs 'axes' or 'box'+'pitch'")


@dataclass(frozen=True)
class ConfidenceRegion:
    """Grid membership of {theta : scaled statistic <= c_used}."""

    grid: ThetaGrid
    member: np.ndarray
    stat: np.ndarray
    c_used: float
    estimator: str = "weighted_ks"
    meta: dict = field(default_factory=dict)

    def member_points(self) -> np.ndarray:
        return self.grid.points()[self.member]

    @property
    def n_members(self) -> int:
        return int(self.member.sum())


@dataclass(frozen=True)
class SetDistanceReport:
    d_h: float
    directed_ab: float
    directed_ba: float
    a_empty: bool = False
    b_empty: bool = False


def _run_indexed(worker, n_points: int, threads: Optional[int]) -> None:
    """Apply worker(i) for all i, optionally across threads, order-independent."""
    threads = max(1, int(threads or 1))
    if threads == 1:
        for i in range(n_points):
            worker(i)
        return
    chunk = max(64, n_points // (threads * 8) + 1)
    spans = [(s, min(s + chunk, n_points)) for s in range(0, n_points, chunk)]

    def run_span(span):
        for i in range(span[0], span[1]):
            worker(i)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(run_span, spans))


def confidence_region(sample: Sample, model: MomentModel, grid: ThetaGrid,
                      family: InstrumentFamily, s: SFunction,
                      tuning: TuningPolicy, *, threads: Optional[int] = None,
                      use_cap: bool = True) -> ConfidenceRegion:
    """Weighted-KS region: {theta : sqrt(n/log n) T_n(theta) <= c_n}.

    With ``use_cap`` (default) the per-point scan exits early once the
    statistic provably exceeds the membership threshold; recorded stat
    values at excluded points are then lower bounds, which leaves the
    membership set unchanged.
    """
    if sample.n < 2:
        raise DegenerateSampleError("confidence_region needs n >= 2")
    if grid.n_points == 0:
        raise ConfigError("grid", "empty grid")
    c = critical_value(tuning, sample.n)
    sn = sigma_n(tuning, sample.n)
    scale = math.sqrt(sample.n / math.log(sample.n))
    t_cap = (c / scale) * (1.0 + 1e-9) + 1e-300 if use_cap else np.inf

    pts = grid.points()
    stat = np.empty(grid.n_points)
    trunc = np.zeros(grid.n_points, dtype=bool)

    if family.kind == "all_data_intervals" and s.kind == "neg_part_sup_norm":
        ctx = IntervalScanContext(sample, model)

        def worker(i):
            v, _, _, _, tr = ctx.scan(pts[i], sn, cap=t_cap)
            stat[i] = scale * max(v, 0.0)
            trunc[i] = tr
    else:
        model.validate_sample(sample)

        def worker(i):
            res = ks_statistic(sample, model, pts[i], family, s, tuning,
                               cap=t_cap if use_cap else None)
            stat[i] = res.scaled
            trunc[i] = res.truncated

    _run_indexed(worker, grid.n_points, threads)
    member = stat <= c
    meta = {"n": sample.n, "sigma_n": sn, "scale": scale,
            "truncated_count": int(trunc.sum())}
    return ConfidenceRegion(grid=grid, member=member, stat=stat, c_used=c,
                            estimator="weighted_ks", meta=meta)


# ---------------------------------------------------------------------------
# set geometry


def _as_point_set(arr) -> np.ndarray:
    a = np.asarray(arr, dtype=np.float64)
    if a.size == 0:
        return a.reshape(0, a.shape[-1] if a.ndim >= 2 else 1)
    if a.ndim == 1:
        return a[:, None]
    return a.reshape(-1, a.shape[-1])


def _directed(a: np.ndarray, b: np.ndarray) -> float:
    """sup over points of a of the distance to the nearest point of b."""
    worst = 0.0
    for start in range(0, a.shape[0], 2048):
        chunk = a[start:start + 2048]
        worst = max(worst, float(cdist(chunk, b).min(axis=1).max()))
    return worst


def hausdorff(a, b) -> SetDistanceReport:
    """Hausdorff distance between finite point sets (Euclidean).

    Empty-vs-empty is 0; empty-vs-nonempty is +inf (flagged via the
    ``*_empty`` fields); the directed distance from an empty set is 0.
    """
    a, b = _as_point_set(a), _as_point_set(b)
    a_empty, b_empty = a.shape[0] == 0, b.shape[0] == 0
    if a_empty and b_empty:
        return SetDistanceReport(0.0, 0.0, 0.0, True, True)
    if a_empty or b_empty:
        return SetDistanceReport(np.inf, 0.0 if a_empty else np.inf,
                                 np.inf if a_empty else 0.0, a_empty, b_empty)
    if a.shape[1] != b.shape[1]:
        raise ConfigError("points", "point sets have different dimensions")
    ab, ba = _directed(a, b), _directed(b, a)
    return SetDistanceReport(max(ab, ba), ab, ba, False, False)


def project(region: ConfidenceRegion, axis: int):
    """Distinct member coordinates on one axis and their interval hull.

    Returns (values, hull) where hull is (min, max) or None for an empty
    region.  ``axis`` is zero-based.
    """
    if not (0 <= axis < region.grid.dim):
        raise ConfigError("axis", f"axis {axis} out of range for dim {region.grid.dim}")
    pts = region.member_points()
    if pts.shape[0] == 0:
        return np.empty(0), None
    values = np.unique(pts[:, axis])
    return values, (float(values[0]), float(values[-1]))


# ---------------------------------------------------------------------------
# export


def _fmt(v) -> str:
    if v == np.inf:
        return "inf"
    if v == -np.inf:
        return "-inf"
    return repr(float(v))


def region_to_csv(path: str, region: ConfidenceRegion) -> None:
    """One row per grid point: coordinates, scaled stat, membership, tag."""
    pts = region.grid.points()
    header = [f"theta{i+1}" for i in range(region.grid.dim)]
    header += ["stat", "member", "estimator"]
    lines = [",".join(header)]
    for i in range(pts.shape[0]):
        row = [_fmt(v) for v in pts[i]]
        row += [_fmt(region.stat[i]), str(int(region.member[i])), region.estimator]
        lines.append(",".join(row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def region_summary(region: ConfidenceRegion) -> dict:
    hulls = []
    for axis in range(region.grid.dim):
        _, hull = project(region, axis)
        hulls.append(list(hull) if hull is not None else None)
    return {"estimator": region.estimator, "c_used": region.c_used,
            "n_points": region.grid.n_points, "n_members": region.n_members,
            "hulls": hulls, "meta": {k: v for k, v in region.meta.items()}}


def region_to_json(path: str, region: ConfidenceRegion) -> None:
    _atomic_write_text(path, json.dumps(region_summary(region), indent=2) + "\n")
