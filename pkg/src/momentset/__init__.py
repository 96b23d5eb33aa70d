"""Confidence regions for conditional moment inequality models.

Estimators: the truncated-variance weighted KS region, a bounded-weight KS
region, and a kernel conditional-mean region, all over rectangular
parameter grids, plus a model library and a Monte Carlo harness.
"""

__version__ = "0.1.0"

from ._kernels import HAVE_EXT, backend_name  # noqa: F401
from .core import (  # noqa: F401
    ConfigError, DegenerateSampleError, DimensionError, DomainError,
    Instrument, InstrumentFamily, MomentModel, MomentSetError, Sample,
    SFunction, eval_instrument, eval_moment, kernel_value, load_sample_csv,
    s_value, save_sample_csv)
from .models import (  # noqa: F401
    BoundaryTransform, ModelSpec, apply_boundary_transform, build_model,
    model_spec_from_json, model_spec_to_json, selection_sample,
    transform_from_json, transform_to_json)
from .ksstat import (  # noqa: F401
    IntervalScanContext, MomentSummary, StatResult, TuningPolicy,
    critical_value, ks_statistic, moment_pair, plugin_sd_scale, sigma_n,
    write_stat_trace)
from .regions import (  # noqa: F401
    ConfidenceRegion, SetDistanceReport, ThetaGrid, confidence_region,
    hausdorff, project, region_to_csv, region_to_json)
from .alt import (  # noqa: F401
    BoundedWeightPolicy, KernelSpec, bounded_ks_statistic, bounded_region,
    kernel_cond_mean, kernel_region)
from .mc import (  # noqa: F401
    DgpSpec, DivergenceReport, IdentifiedSetOracle, McCell, McDesign,
    McReport, RateReport, contact_set, design_from_json, design_to_json,
    divergence_diagnostic, median_bands, median_missing, missing_probability,
    model_for, oracle_set, rate_experiment, replication_rng, run_mc,
    selection_tails, simulate, slope_counterexample, write_axis_table,
    write_distance_table, write_hull_table, write_manifest, write_per_rep)
