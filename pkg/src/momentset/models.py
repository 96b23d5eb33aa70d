"""Built-in moment models and conditioning-variable transforms.

Model kinds and their w-column layouts (x columns repeat the conditioning
variables so that instrument-side transforms never touch moment inputs):

==================== ============================= =====================
kind                 w columns                     moments (E >= 0)
==================== ============================= =====================
one_sided_regression (x1..xk, w_out)               w_out - pred
interval_regression  (x1..xk, w_l, w_h)            (w_h - pred, pred - w_l)
one_sided_quantile   (x1..xk, w_out)               tau - 1{w_out <= pred}
interval_quantile    (x1..xk, w_l, w_h)            (tau - 1{w_h <= pred},
                                                    1{w_l <= pred} - tau)
selection            (w_l, w_h)                    (gamma - w_l, w_h - gamma)
==================== ============================= =====================

where pred = theta_1 + x' theta_{-1} (selection uses the scalar gamma).
Quantile kinds allow +-inf in the censorable columns (the indicators absorb
them); mean-based kinds refuse infinite w values.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .core import ConfigError, DomainError, MomentModel, Sample

_MEAN_KINDS = ("one_sided_regression", "interval_regression", "selection")
_QUANTILE_KINDS = ("one_sided_quantile", "interval_quantile")
_ALL_KINDS = _MEAN_KINDS + _QUANTILE_KINDS


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of a bundled model; see module docstring.

    ``w_bound`` / ``x_bound`` are optional a.s. bounds on |w| columns and
    |x| used only to compute the moment bound for mean-based kinds; without
    them the bound is reported as +inf.
    """

    kind: str
    d_x: int = 1
    tau: Optional[float] = None
    theta_box: Optional[tuple] = None
    y_lower: Optional[float] = None
    y_upper: Optional[float] = None
    w_bound: Optional[float] = None
    x_bound: Optional[float] = None


def _check_spec(spec: ModelSpec) -> np.ndarray:
    if spec.kind not in _ALL_KINDS:
        raise ConfigError("kind", f"unknown model kind '{spec.kind}'")
    if spec.kind in _QUANTILE_KINDS:
        if spec.tau is None or not (0.0 < spec.tau < 1.0):
            raise ConfigError("tau", "quantile kinds require tau in (0, 1)")
    if spec.kind == "selection":
        if spec.y_lower is None or spec.y_upper is None:
            raise ConfigError("y_lower", "selection requires y_lower and y_upper")
        if not (np.isfinite(spec.y_lower) and np.isfinite(spec.y_upper)
                and spec.y_lower < spec.y_upper):
            raise ConfigError("y_lower", "need finite y_lower < y_upper")
    if spec.d_x < 1:
        raise ConfigError("d_x", "d_x must be >= 1")
    theta_dim = 1 if spec.kind == "selection" else 1 + spec.d_x
    if spec.theta_box is None:
        if spec.kind == "selection":
            return np.array([[spec.y_lower, spec.y_upper]], dtype=np.float64)
        if spec.kind in _MEAN_KINDS:
            raise ConfigError("theta_box", "mean kinds need an explicit bounded box")
        return np.tile([-np.inf, np.inf], (theta_dim, 1)).astype(np.float64)
    box = np.asarray(spec.theta_box, dtype=np.float64).reshape(theta_dim, 2)
    if (box[:, 0] > box[:, 1]).any():
        raise ConfigError("theta_box", "lower bounds exceed upper bounds")
    if spec.kind in _MEAN_KINDS and not np.isfinite(box).all():
        raise ConfigError("theta_box", f"mean kind '{spec.kind}' needs a bounded box")
    return box


def _y_bar(spec: ModelSpec, box: np.ndarray) -> float:
    if spec.kind in _QUANTILE_KINDS:
        return max(spec.tau, 1.0 - spec.tau)
    if spec.kind == "selection":
        corners = [box[0, 0] - spec.y_upper, box[0, 0] - spec.y_lower,
                   box[0, 1] - spec.y_upper, box[0, 1] - spec.y_lower]
        return float(max(abs(v) for v in corners))
    if spec.w_bound is None or spec.x_bound is None:
        return np.inf
    slope_reach = np.abs(box).max(axis=1)
    return float(spec.w_bound + slope_reach[0] + spec.x_bound * slope_reach[1:].sum())


def build_model(spec: ModelSpec) -> MomentModel:
    """Construct the MomentModel for a spec, validating all parameters."""
    box = _check_spec(spec)
    kind, k, tau = spec.kind, spec.d_x, spec.tau

    def pred_row(w_row, theta):
        return theta[0] + float(np.dot(w_row[:k], theta[1:]))

    def pred_mat(sample, theta):
        return theta[0] + sample.w[:, :k] @ theta[1:]

    if kind == "one_sided_regression":
        d_y, d_w = 1, k + 1
        censorable = np.zeros(d_w, dtype=bool)

        def m(w_row, theta):
            return np.array([w_row[k] - pred_row(w_row, theta)])

        def moment_matrix(sample, theta):
            return (sample.w[:, k] - pred_mat(sample, theta))[:, None]

    elif kind == "interval_regression":
        d_y, d_w = 2, k + 2
        censorable = np.zeros(d_w, dtype=bool)

        def m(w_row, theta):
            p = pred_row(w_row, theta)
            return np.array([w_row[k + 1] - p, p - w_row[k]])

        def moment_matrix(sample, theta):
            p = pred_mat(sample, theta)
            return np.column_stack([sample.w[:, k + 1] - p, p - sample.w[:, k]])

    elif kind == "one_sided_quantile":
        d_y, d_w = 1, k + 1
        censorable = np.zeros(d_w, dtype=bool)
        censorable[k] = True

        def m(w_row, theta):
            return np.array([tau - float(w_row[k] <= pred_row(w_row, theta))])

        def moment_matrix(sample, theta):
            p = pred_mat(sample, theta)
            return (tau - (sample.w[:, k] <= p))[:, None].astype(np.float64)

    elif kind == "interval_quantile":
        d_y, d_w = 2, k + 2
        censorable = np.zeros(d_w, dtype=bool)
        censorable[k] = censorable[k + 1] = True

        def m(w_row, theta):
            p = pred_row(w_row, theta)
            return np.array([tau - float(w_row[k + 1] <= p),
                             float(w_row[k] <= p) - tau])

        def moment_matrix(sample, theta):
            p = pred_mat(sample, theta)
            return np.column_stack([tau - (sample.w[:, k + 1] <= p),
                                    (sample.w[:, k] <= p) - tau]).astype(np.float64)

    else:  # selection
        d_y, d_w = 2, 2
        censorable = np.zeros(d_w, dtype=bool)

        def m(w_row, theta):
            return np.array([theta[0] - w_row[0], w_row[1] - theta[0]])

        def moment_matrix(sample, theta):
            return np.column_stack([theta[0] - sample.w[:, 0],
                                    sample.w[:, 1] - theta[0]])

    theta_dim = 1 if kind == "selection" else 1 + k
    meta = {key: val for key, val in asdict(spec).items() if val is not None}
    return MomentModel(kind=kind, d_y=d_y, theta_dim=theta_dim, d_w=d_w,
                       theta_box=box, y_bar=_y_bar(spec, box),
                       censorable=censorable, m=m, moment_matrix=moment_matrix,
                       meta=meta)


_SPEC_KEYS = ("kind", "d_x", "tau", "theta_box", "y_lower", "y_upper",
              "w_bound", "x_bound")


def model_spec_to_json(spec: ModelSpec) -> dict:
    """Plain-dict form of a spec (JSON-serializable; drops unset fields)."""
    out = {}
    for key, val in asdict(spec).items():
        if val is None:
            continue
        out[key] = list(map(list, val)) if key == "theta_box" else val
    return out


def model_spec_from_json(obj: dict) -> ModelSpec:
    """Inverse of :func:`model_spec_to_json`; rejects unknown keys."""
    for key in obj:
        if key not in _SPEC_KEYS:
            raise ConfigError(key, "unknown model spec field")
    if "kind" not in obj:
        raise ConfigError("kind", "model spec requires 'kind'")
    kwargs = dict(obj)
    if "theta_box" in kwargs:
        kwargs["theta_box"] = tuple(tuple(float(v) for v in row)
                                    for row in kwargs["theta_box"])
    return ModelSpec(**kwargs)


def selection_sample(x, y, observed, y_lower: float, y_upper: float,
                     tol: float = 1e-9) -> Sample:
    """Assemble a selection-model sample from outcomes and selection flags.

    Observed outcomes must lie in [y_lower, y_upper]; values within ``tol``
    of the interval are clamped onto it, anything further out raises.
    Unobserved rows get the interval endpoints as (w_l, w_h).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[0] == 1 and x.shape[1] > 1:
        x = x.T
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    observed = np.asarray(observed, dtype=bool).reshape(-1)
    if not (x.shape[0] == y.shape[0] == observed.shape[0]):
        raise ConfigError("y", "x, y, observed must have equal lengths")
    out = (observed & ((y < y_lower - tol) | (y > y_upper + tol)))
    if out.any():
        raise DomainError(
            f"observed outcome outside [{y_lower}, {y_upper}]",
            row=int(np.flatnonzero(out)[0]))
    y = np.clip(y, y_lower, y_upper)
    w_l = np.where(observed, y, y_lower)
    w_h = np.where(observed, y, y_upper)
    return Sample(x=x, w=np.column_stack([w_l, w_h]))


# ---------------------------------------------------------------------------
# monotone transforms of the conditioning variable


@dataclass(frozen=True)
class BoundaryTransform:
    """Coordinatewise monotone reparameterization of x.

    kind='finite_support': near a declared upper support endpoint x0, map
    x -> x0 - (x0 - x)^(phi_x + 1) on the window (x0 - eta, x0], identity
    below the window.  Requires phi_x > -1 and eta^(phi_x+1) <= eta so the
    two branches do not overlap (invertibility across the seam).

    kind='at_infinity': map x -> k_x + 1 - 1/(x - k_x + 1) for x > k_x,
    identity below; compresses the upper tail into (k_x, k_x + 1).  phi_x
    here records the tail thickness of the x distribution (it parameterizes
    rate predictions, not the map itself) and must exceed 1.
    """

    kind: str
    x0: Optional[tuple] = None
    phi_x: Optional[float] = None
    eta: float = 1.0
    k_x: Optional[float] = None

    def __post_init__(self):
        if self.kind == "finite_support":
            if self.x0 is None:
                raise ConfigError("x0", "finite_support requires x0")
            if self.phi_x is None or not (self.phi_x > -1.0):
                raise ConfigError("phi_x", "finite_support requires phi_x > -1")
            if not (self.eta > 0.0):
                raise ConfigError("eta", "window width eta must be positive")
            if self.eta ** (self.phi_x + 1.0) > self.eta * (1.0 + 1e-12):
                raise ConfigError(
                    "eta", "eta^(phi_x+1) > eta: branches overlap, map not invertible")
        elif self.kind == "at_infinity":
            if self.k_x is None or not np.isfinite(self.k_x):
                raise ConfigError("k_x", "at_infinity requires finite k_x")
            if self.phi_x is None or not (self.phi_x > 1.0):
                raise ConfigError("phi_x", "at_infinity requires phi_x > 1")
        else:
            raise ConfigError("kind", f"unknown transform kind '{self.kind}'")

    def transform_x(self, x: np.ndarray) -> np.ndarray:
        """Apply the map to an (n, d_x) array; raises DomainError off-domain."""
        x = np.array(np.atleast_2d(x), dtype=np.float64)
        if self.kind == "finite_support":
            x0 = np.broadcast_to(np.asarray(self.x0, dtype=np.float64).reshape(-1),
                                 (x.shape[1],))
            over = x > x0
            if over.any():
                raise DomainError("x above the declared support endpoint x0",
                                  row=int(np.argwhere(over)[0, 0]))
            active = x > (x0 - self.eta)
            gap = np.where(active, x0 - x, 1.0)
            x = np.where(active, x0 - gap ** (self.phi_x + 1.0), x)
        else:
            active = x > self.k_x
            denom = np.where(active, x - self.k_x + 1.0, 1.0)
            x = np.where(active, self.k_x + 1.0 - 1.0 / denom, x)
        return x


def apply_boundary_transform(sample: Sample, transform: BoundaryTransform) -> Sample:
    """Transform the conditioning variables of a sample; w columns unchanged."""
    return Sample(x=transform.transform_x(sample.x), w=sample.w)


def transform_to_json(transform: BoundaryTransform) -> dict:
    out = {k: v for k, v in asdict(transform).items() if v is not None}
    if "x0" in out:
        out["x0"] = list(out["x0"])
    return out


def transform_from_json(obj: dict) -> BoundaryTransform:
    allowed = ("kind", "x0", "phi_x", "eta", "k_x")
    for key in obj:
        if key not in allowed:
            raise ConfigError(key, "unknown transform field")
    kwargs = dict(obj)
    if "x0" in kwargs:
        x0 = kwargs["x0"]
        kwargs["x0"] = tuple(x0) if isinstance(x0, (list, tuple)) else (float(x0),)
    return BoundaryTransform(**kwargs)
