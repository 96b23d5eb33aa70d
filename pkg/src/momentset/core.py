"""Core data types: samples, moment models, instruments, criterion functions.

A conditional moment inequality model restricts a distribution P through
E_P[m_j(W_i, theta) | X_i] >= 0 a.s. for each component j.  Everything in
this package works with the unconditional moments E[m_j(W_i, theta) g(X_i)]
obtained by pairing the model with nonnegative instrument functions g of the
conditioning variable.
"""
from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np


# ---------------------------------------------------------------------------
# errors


class MomentSetError(Exception):
    """Base class for structured errors raised by this package."""


class ConfigError(MomentSetError):
    """Invalid configuration value.  ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config error at '{key}': {message}")


class DomainError(MomentSetError):
    """Data outside the domain of an operation; ``row`` is the offending index."""

    def __init__(self, message: str, row: Optional[int] = None):
        self.row = row
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)


class DimensionError(MomentSetError):
    """Shape mismatch between arrays, models, or grids."""


class DegenerateSampleError(MomentSetError):
    """Sample too small or otherwise unusable for the requested operation."""


# ---------------------------------------------------------------------------
# samples


@dataclass(frozen=True)
class Sample:
    """Observations (x_i, w_i), i = 1..n.

    ``x`` holds the conditioning variables used by instruments and must be
    finite.  ``w`` holds everything the moment functions consume; models
    that encode censored endpoints may declare columns in which +-inf is
    allowed.  For regression-type models the x columns are repeated inside
    ``w`` so that instrument transforms can act on ``x`` alone without
    touching the moment evaluations.
    """

    x: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        w = np.atleast_2d(np.asarray(self.w, dtype=np.float64))
        if x.shape[0] != w.shape[0]:
            raise DimensionError(
                f"x has {x.shape[0]} rows but w has {w.shape[0]}")
        bad = ~np.isfinite(x)
        if bad.any():
            raise DomainError("non-finite value in x", row=int(np.argwhere(bad)[0, 0]))
        if np.isnan(w).any():
            raise DomainError("NaN in w", row=int(np.argwhere(np.isnan(w))[0, 0]))
        object.__setattr__(self, "x", np.ascontiguousarray(x))
        object.__setattr__(self, "w", np.ascontiguousarray(w))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d_x(self) -> int:
        return self.x.shape[1]

    @property
    def d_w(self) -> int:
        return self.w.shape[1]


def _atomic_write_text(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file + rename in the same dir."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value: float) -> str:
    if value == np.inf:
        return "inf"
    if value == -np.inf:
        return "-inf"
    return repr(float(value))


def save_sample_csv(path: str, sample: Sample) -> None:
    """Write a sample as CSV with header x1..xk, w1..wm; +-inf as inf/-inf."""
    header = [f"x{i+1}" for i in range(sample.d_x)] + \
             [f"w{i+1}" for i in range(sample.d_w)]
    lines = [",".join(header)]
    for xr, wr in zip(sample.x, sample.w):
        lines.append(",".join(_fmt(v) for v in list(xr) + list(wr)))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def load_sample_csv(path: str) -> Sample:
    """Read a sample written by :func:`save_sample_csv`.

    The header must list the x columns (x1..xk) followed by the w columns
    (w1..wm).  The tokens ``inf`` and ``-inf`` encode censored endpoints.
    An empty data section yields an n = 0 sample.
    """
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError("data", f"{path}: empty file, header required")
        header = [h.strip() for h in header]
        n_x = sum(1 for h in header if h.startswith("x"))
        n_w = len(header) - n_x
        expect = [f"x{i+1}" for i in range(n_x)] + [f"w{i+1}" for i in range(n_w)]
        if header != expect or n_w == 0:
            raise ConfigError(
                "data", f"{path}: header must be x1..x{max(n_x,1)},w1..w{max(n_w,1)}, "
                        f"got {header}")
        rows = []
        for idx, line in enumerate(reader):
            if not line:
                continue
            if len(line) != len(header):
                raise DomainError(f"{path}: wrong number of fields", row=idx)
            try:
                rows.append([float(tok) for tok in line])
            except ValueError:
                raise DomainError(f"{path}: unparseable number", row=idx)
    data = np.asarray(rows, dtype=np.float64) if rows else np.empty((0, len(header)))
    return Sample(x=data[:, :n_x].reshape(-1, n_x), w=data[:, n_x:].reshape(-1, n_w))


# ---------------------------------------------------------------------------
# moment models


@dataclass(frozen=True)
class MomentModel:
    """Moment functions m(w, theta) -> R^{d_y} plus their metadata.

    ``m`` evaluates one observation; ``moment_matrix`` evaluates a whole
    sample at once and is the path used by estimators.  ``y_bar`` bounds
    |m_j g| for unit-bounded instruments (used by tuning heuristics), and
    ``censorable`` flags the w columns in which +-inf encodes a censored
    endpoint.  Moment values themselves are always finite: indicator-based
    components absorb infinite endpoints, and mean-based models refuse them.
    """

    kind: str
    d_y: int
    theta_dim: int
    d_w: int
    theta_box: np.ndarray
    y_bar: float
    censorable: np.ndarray
    m: Callable[[np.ndarray, np.ndarray], np.ndarray]
    moment_matrix: Callable[[Sample, np.ndarray], np.ndarray]
    meta: dict = field(default_factory=dict)

    def validate_sample(self, sample: Sample) -> None:
        if sample.d_w != self.d_w:
            raise DimensionError(
                f"model '{self.kind}' expects d_w={self.d_w}, sample has {sample.d_w}")
        if sample.n:
            fixed = ~self.censorable
            bad = ~np.isfinite(sample.w[:, fixed])
            if bad.any():
                row = int(np.argwhere(bad)[0, 0])
                raise DomainError(
                    f"model '{self.kind}' does not allow infinite values in "
                    f"w column(s) {np.flatnonzero(fixed).tolist()}", row=row)

    def validate_theta(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        if theta.shape[0] != self.theta_dim:
            raise DimensionError(
                f"theta has length {theta.shape[0]}, expected {self.theta_dim}")
        lo, hi = self.theta_box[:, 0], self.theta_box[:, 1]
        if (theta < lo).any() or (theta > hi).any():
            raise DomainError(f"theta {theta.tolist()} outside the parameter box")
        return theta


def eval_moment(model: MomentModel, w_row: np.ndarray, theta) -> np.ndarray:
    """Evaluate m(w, theta) for a single observation, validating theta."""
    theta = model.validate_theta(theta)
    w_row = np.asarray(w_row, dtype=np.float64).reshape(-1)
    if w_row.shape[0] != model.d_w:
        raise DimensionError(f"w row has length {w_row.shape[0]}, expected {model.d_w}")
    return np.asarray(model.m(w_row, theta), dtype=np.float64)


# ---------------------------------------------------------------------------
# instruments


_KERNELS = {
    "uniform": lambda u: 0.5 * (np.abs(u) <= 1.0),
    "epanechnikov": lambda u: 0.75 * np.maximum(1.0 - u * u, 0.0) * (np.abs(u) <= 1.0),
    "triangular": lambda u: np.maximum(1.0 - np.abs(u), 0.0),
}


def kernel_value(kernel_id: str, u):
    """Evaluate a named density kernel (integrates to one on the real line)."""
    try:
        k = _KERNELS[kernel_id]
    except KeyError:
        raise ConfigError("kernel_id", f"unknown kernel '{kernel_id}'")
    return k(np.asarray(u, dtype=np.float64))


@dataclass(frozen=True)
class Instrument:
    """A nonnegative function of the conditioning variable.

    kind='box': g(x) = prod_k 1(s_k < x_k <= t_k), with the half-open
    convention (strict below, weak above); s_k = -inf and t_k = +inf give
    unbounded sides.  kind='kernel_dilation': g(x) = prod_k K((x_k - c_k)/h)
    for a named kernel K.
    """

    kind: str
    s: Optional[tuple] = None
    t: Optional[tuple] = None
    center: Optional[tuple] = None
    bandwidth: Optional[float] = None
    kernel_id: str = "uniform"

    def weights(self, x: np.ndarray) -> np.ndarray:
        """g evaluated at each row of ``x`` (shape (n, d_x) -> (n,))."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.kind == "box":
            s = np.asarray(self.s, dtype=np.float64)
            t = np.asarray(self.t, dtype=np.float64)
            inside = (x > s) & (x <= t)
            return inside.all(axis=1).astype(np.float64)
        if self.kind == "kernel_dilation":
            c = np.asarray(self.center, dtype=np.float64)
            u = (x - c) / float(self.bandwidth)
            vals = kernel_value(self.kernel_id, u)
            return np.prod(np.atleast_2d(vals), axis=1)
        raise ConfigError("instrument", f"unknown instrument kind '{self.kind}'")


def eval_instrument(instrument: Instrument, x) -> np.ndarray:
    """Instrument weights for the given conditioning values."""
    return instrument.weights(x)


def _thin_values(values: np.ndarray, cap: Optional[int]) -> np.ndarray:
    """At most ``cap`` sorted unique values, keeping both extremes."""
    uniq = np.unique(values)
    if cap is None or len(uniq) <= cap:
        return uniq
    idx = np.unique(np.round(np.linspace(0, len(uniq) - 1, cap)).astype(int))
    return uniq[idx]


@dataclass(frozen=True)
class InstrumentFamily:
    """A collection of instruments indexed by the data.

    kind='all_data_intervals' (d_x = 1): every half-open interval with
    endpoints at observed x values (equivalently, every contiguous run of
    order statistics).  kind='all_data_boxes' (d_x = 2): every box with
    corner coordinates at observed values, optionally thinned to at most
    ``thinning`` candidate values per axis (always keeping the extremes);
    with thinning the supremum is over the reduced family.
    kind='kernel_dilations': K((x - c)/h) over a grid of centers and
    bandwidths.
    """

    kind: str
    thinning: Optional[int] = None
    centers: Optional[tuple] = None
    bandwidths: Optional[tuple] = None
    kernel_id: str = "uniform"

    def instruments(self, sample: Sample) -> Iterator[Instrument]:
        """Canonical enumeration; the estimators may use faster equivalent paths."""
        if self.kind == "all_data_intervals":
            if sample.d_x != 1:
                raise DimensionError("all_data_intervals requires d_x = 1")
            vals = np.unique(sample.x[:, 0])
            lowers = np.concatenate([[-np.inf], vals])
            for i, s in enumerate(lowers):
                for t in vals[i:] if i else vals:
                    yield Instrument(kind="box", s=(float(s),), t=(float(t),))
        elif self.kind == "all_data_boxes":
            if sample.d_x != 2:
                raise DimensionError("all_data_boxes requires d_x = 2")
            v1 = _thin_values(sample.x[:, 0], self.thinning)
            v2 = _thin_values(sample.x[:, 1], self.thinning)
            low1 = np.concatenate([[-np.inf], v1])
            low2 = np.concatenate([[-np.inf], v2])
            for i1, s1 in enumerate(low1):
                for t1 in v1[i1:] if i1 else v1:
                    for i2, s2 in enumerate(low2):
                        for t2 in v2[i2:] if i2 else v2:
                            yield Instrument(kind="box", s=(float(s1), float(s2)),
                                             t=(float(t1), float(t2)))
        elif self.kind == "kernel_dilations":
            if not self.centers or not self.bandwidths:
                raise ConfigError("family", "kernel_dilations needs centers and bandwidths")
            for h in self.bandwidths:
                for c in self.centers:
                    center = tuple(np.atleast_1d(np.asarray(c, dtype=float)))
                    yield Instrument(kind="kernel_dilation", center=center,
                                     bandwidth=float(h), kernel_id=self.kernel_id)
        else:
            raise ConfigError("family", f"unknown family kind '{self.kind}'")


# ---------------------------------------------------------------------------
# criterion functions


@dataclass(frozen=True)
class SFunction:
    """Criterion mapping a studentized moment vector to a scalar >= 0.

    'neg_part_sup_norm': S(t) = max_j max(-t_j, 0), the sup norm of the
    negative part; positive exactly when some component is violated.
    'neg_part_p_norm': the l_p norm of the negative part for finite p >= 1.
    """

    kind: str = "neg_part_sup_norm"
    p: float = np.inf

    def __post_init__(self):
        if self.kind not in ("neg_part_sup_norm", "neg_part_p_norm"):
            raise ConfigError("s_function", f"unknown S function kind '{self.kind}'")
        if self.kind == "neg_part_p_norm" and not (1.0 <= self.p < np.inf):
            raise ConfigError("s_function", "neg_part_p_norm requires 1 <= p < inf")

    def value(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        neg = np.maximum(-t, 0.0)
        if self.kind == "neg_part_sup_norm":
            return neg.max(axis=-1)
        return (neg ** self.p).sum(axis=-1) ** (1.0 / self.p)

    def constants(self, d_y: int) -> tuple:
        """(K1, K2) with K1*S(t) <= max_j max(-t_j, 0) <= ... <= K2-scaled bounds."""
        if self.kind == "neg_part_sup_norm":
            return 1.0, 1.0
        return d_y ** (-1.0 / self.p), d_y ** (1.0 / self.p)


def s_value(s: SFunction, t) -> float:
    """Apply the criterion function to one studentized vector."""
    return float(s.value(np.asarray(t, dtype=np.float64).reshape(-1)))
