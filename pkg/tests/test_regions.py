"""Grids, confidence regions, Hausdorff geometry, projections, exports."""
from __future__ import annotations

import csv
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from momentset import (
    ConfigError,
    InstrumentFamily,
    ModelSpec,
    SFunction,
    ThetaGrid,
    TuningPolicy,
    build_model,
    confidence_region,
    hausdorff,
    project,
    region_to_csv,
    region_to_json,
)

from conftest import brute_hausdorff, interval_sample

FAMILY = InstrumentFamily(kind="all_data_intervals")
SUP = SFunction(kind="neg_part_sup_norm")


def reg_model():
    return build_model(ModelSpec(kind="interval_regression",
                                 theta_box=((-5, 5), (-5, 5)), w_bound=10.0))


def fixed(c, sigma=0.1):
    return TuningPolicy(sigma_rule="fixed", sigma_value=sigma,
                        c_rule="fixed", c_value=c)


# ---------------------------------------------------------------------------
# ThetaGrid


def test_grid_from_pitch_alignment():
    g = ThetaGrid.from_pitch(((0.0, 1.0),), 0.25)
    assert_allclose(g.axes[0], [0.0, 0.25, 0.5, 0.75, 1.0])
    g2 = ThetaGrid.from_pitch(((-1.1, 1.6), (-0.7, 1.7)), 0.1)
    for ax in g2.axes:
        steps = np.diff(ax)
        assert_allclose(steps, 0.1, rtol=1e-9)
        # breakpoints land on exact multiples of the pitch
        assert_allclose(np.round(ax / 0.1) * 0.1, ax, atol=1e-12)
    assert g2.n_points == len(g2.axes[0]) * len(g2.axes[1])


def test_grid_pinned_axis():
    g = ThetaGrid.from_pitch(((0.0, 0.0), (-1.0, 1.0)), 0.5)
    assert_allclose(g.axes[0], [0.0])
    assert g.shape == (1, 5)


def test_grid_points_ordering():
    g = ThetaGrid(axes=(np.array([0.0, 1.0]), np.array([10.0, 20.0])))
    assert_array_equal(g.points(),
                       [[0, 10], [0, 20], [1, 10], [1, 20]])


def test_grid_validation():
    with pytest.raises(ConfigError):
        ThetaGrid(axes=(np.array([0.0, 0.0]),))
    with pytest.raises(ConfigError):
        ThetaGrid(axes=(np.array([1.0, 0.0]),))


def test_grid_json_round_trip():
    g = ThetaGrid.from_pitch(((-1.0, 1.0), (0.0, 2.0)), 0.25)
    back = ThetaGrid.from_json(g.to_json())
    for a, b in zip(g.axes, back.axes):
        assert_array_equal(a, b)
    g2 = ThetaGrid.from_json({"box": [[0.0, 1.0]], "pitch": 0.5})
    assert_allclose(g2.axes[0], [0.0, 0.5, 1.0])


# ---------------------------------------------------------------------------
# confidence_region


def test_region_extreme_critical_values():
    s = interval_sample(40, 211)
    model = reg_model()
    grid = ThetaGrid.from_pitch(((-2.0, 2.0), (-1.0, 1.0)), 0.5)
    assert confidence_region(s, model, grid, FAMILY, SUP,
                             fixed(1e9)).member.all()
    assert not confidence_region(s, model, grid, FAMILY, SUP,
                                 fixed(-1.0)).member.any()


def test_region_membership_rule_and_cap_equivalence():
    model = reg_model()
    rng = np.random.default_rng(223)
    for trial in range(6):
        s = interval_sample(60, int(rng.integers(1e9)))
        grid = ThetaGrid.from_pitch(((-2.0, 2.0), (-1.0, 1.0)), 0.25)
        full = confidence_region(s, model, grid, FAMILY, SUP, TuningPolicy(),
                                 use_cap=False)
        capped = confidence_region(s, model, grid, FAMILY, SUP, TuningPolicy(),
                                   use_cap=True)
        assert_array_equal(full.member, capped.member)
        assert_array_equal(full.member, full.stat <= full.c_used)
        assert_array_equal(capped.member, capped.stat <= capped.c_used)
        # exact stats agree wherever the capped pass did not truncate
        keep = capped.stat <= capped.c_used
        assert_allclose(capped.stat[keep], full.stat[keep], rtol=0, atol=0)
        assert capped.meta["truncated_count"] <= (~keep).sum()


def test_region_nesting_in_c():
    s = interval_sample(50, 227)
    model = reg_model()
    grid = ThetaGrid.from_pitch(((-2.0, 2.0), (-1.0, 1.0)), 0.25)
    prev = None
    widths = []
    for c in (0.5, 1.5, 3.0, 6.0):
        r = confidence_region(s, model, grid, FAMILY, SUP, fixed(c),
                              use_cap=False)
        if prev is not None:
            assert (prev.member <= r.member).all()  # subset
        _, hull = project(r, 0)
        widths.append(-np.inf if hull is None else hull[1] - hull[0])
        prev = r
    assert all(b >= a for a, b in zip(widths, widths[1:]))


def test_region_threads_deterministic():
    s = interval_sample(60, 229)
    model = reg_model()
    grid = ThetaGrid.from_pitch(((-2.0, 2.0), (-1.0, 1.0)), 0.2)
    r1 = confidence_region(s, model, grid, FAMILY, SUP, TuningPolicy(), threads=1)
    r4 = confidence_region(s, model, grid, FAMILY, SUP, TuningPolicy(), threads=4)
    assert_array_equal(r1.member, r4.member)
    assert_array_equal(r1.stat, r4.stat)


def test_region_empty_grid_rejected():
    s = interval_sample(10, 233)
    with pytest.raises(ConfigError):
        confidence_region(s, reg_model(),
                          ThetaGrid(axes=(np.array([]), np.array([0.0]))),
                          FAMILY, SUP, TuningPolicy())


# ---------------------------------------------------------------------------
# hausdorff


def test_hausdorff_trivial_cases():
    r = hausdorff(np.array([[0.0, 0.0]]), np.array([[0.0, 0.0]]))
    assert r.d_h == 0.0
    r = hausdorff(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[0.0, 0.0]]))
    assert r.d_h == 1.0
    assert (r.directed_ab, r.directed_ba) == (1.0, 0.0)


def test_hausdorff_empty_sentinels():
    r = hausdorff(np.empty((0, 2)), np.empty((0, 2)))
    assert r.d_h == 0.0 and r.a_empty and r.b_empty
    r = hausdorff(np.empty((0, 2)), np.array([[1.0, 1.0]]))
    assert r.d_h == np.inf and r.a_empty and not r.b_empty
    assert r.directed_ab == 0.0 and r.directed_ba == np.inf


def test_hausdorff_matches_brute_force():
    rng = np.random.default_rng(239)
    for _ in range(30):
        a = rng.random(size=(int(rng.integers(1, 41)), 2))
        b = rng.random(size=(int(rng.integers(1, 41)), 2))
        got = hausdorff(a, b)
        assert abs(got.d_h - brute_hausdorff(a, b)) <= 1e-12
        sym = hausdorff(b, a)
        assert got.d_h == sym.d_h
        assert got.directed_ab == sym.directed_ba


def test_hausdorff_axioms():
    rng = np.random.default_rng(241)
    for _ in range(100):
        a = rng.random(size=(int(rng.integers(1, 12)), 2))
        b = rng.random(size=(int(rng.integers(1, 12)), 2))
        c = rng.random(size=(int(rng.integers(1, 12)), 2))
        assert hausdorff(a, a).d_h == 0.0
        dab, dbc, dac = (hausdorff(a, b).d_h, hausdorff(b, c).d_h,
                         hausdorff(a, c).d_h)
        assert dac <= dab + dbc + 1e-12


def test_hausdorff_invariant_to_point_order():
    rng = np.random.default_rng(251)
    a = rng.random(size=(25, 2))
    b = rng.random(size=(30, 2))
    base = hausdorff(a, b).d_h
    for _ in range(5):
        assert hausdorff(rng.permutation(a), rng.permutation(b)).d_h == base


def test_hausdorff_chunked_path():
    # exceed the 2048-row chunk size to cover the blocked code path
    rng = np.random.default_rng(257)
    a = rng.random(size=(5000, 2))
    b = rng.random(size=(70, 2))
    got = hausdorff(a, b)
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    ab = d.min(axis=1).max()
    ba = d.min(axis=0).max()
    assert_allclose(got.directed_ab, ab, rtol=0, atol=1e-12)
    assert_allclose(got.directed_ba, ba, rtol=0, atol=1e-12)
    assert got.d_h == max(got.directed_ab, got.directed_ba)


# ---------------------------------------------------------------------------
# projections and exports


def make_region(member, grid, c=1.0):
    from momentset import ConfidenceRegion
    stat = np.where(member, 0.0, 2.0)
    return ConfidenceRegion(grid=grid, member=member, stat=stat, c_used=c,
                            estimator="weighted_ks", meta={})


def test_project_full_and_single():
    grid = ThetaGrid(axes=(np.array([0.0, 0.25]), np.array([0.5, 1.0])))
    full = make_region(np.ones(4, dtype=bool), grid)
    vals, hull = project(full, 0)
    assert_allclose(vals, [0.0, 0.25])
    assert hull == (0.0, 0.25)
    single = make_region(np.array([True, False, False, False]), grid)
    vals, hull = project(single, 1)
    assert_allclose(vals, [0.5])
    assert hull == (0.5, 0.5)


def test_project_empty_region():
    grid = ThetaGrid(axes=(np.array([0.0, 1.0]),))
    empty = make_region(np.zeros(2, dtype=bool), grid)
    vals, hull = project(empty, 0)
    assert vals.size == 0 and hull is None


def test_project_axis_bounds():
    grid = ThetaGrid(axes=(np.array([0.0, 1.0]),))
    region = make_region(np.ones(2, dtype=bool), grid)
    with pytest.raises(ConfigError):
        project(region, 1)


def test_region_csv_and_json_export(tmp_path):
    s = interval_sample(30, 263)
    model = reg_model()
    grid = ThetaGrid.from_pitch(((-1.0, 1.0), (-1.0, 1.0)), 0.5)
    region = confidence_region(s, model, grid, FAMILY, SUP, TuningPolicy())
    cpath = str(tmp_path / "region.csv")
    region_to_csv(cpath, region)
    with open(cpath, newline="") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == grid.n_points
    for row, member, stat in zip(rows, region.member, region.stat):
        assert row["member"] == ("1" if member else "0")
        assert float(row["stat"]) == stat
        assert row["estimator"] == "weighted_ks"
    jpath = str(tmp_path / "region.json")
    region_to_json(jpath, region)
    obj = json.load(open(jpath))
    assert obj["c_used"] == region.c_used
    assert obj["n_members"] == int(region.member.sum())
    assert len(obj["hulls"]) == 2
    lo, hi = obj["hulls"][0]
    _, hull = project(region, 0)
    assert (lo, hi) == hull
