"""Samples, CSV persistence, instruments, families, and criterion functions."""
from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from momentset import (
    ConfigError,
    DimensionError,
    DomainError,
    Instrument,
    InstrumentFamily,
    Sample,
    SFunction,
    eval_instrument,
    kernel_value,
    load_sample_csv,
    s_value,
    save_sample_csv,
)


# ---------------------------------------------------------------------------
# Sample


def test_sample_shape_properties():
    s = Sample(x=np.zeros((7, 2)), w=np.ones((7, 3)))
    assert (s.n, s.d_x, s.d_w) == (7, 2, 3)


def test_sample_row_mismatch():
    with pytest.raises(DimensionError):
        Sample(x=np.zeros((4, 1)), w=np.zeros((5, 1)))


def test_sample_rejects_nonfinite_x():
    x = np.zeros((3, 1))
    x[2, 0] = np.inf
    with pytest.raises(DomainError) as err:
        Sample(x=x, w=np.zeros((3, 1)))
    assert err.value.row == 2


def test_sample_rejects_nan_w_but_allows_inf():
    w = np.zeros((3, 2))
    w[1, 0] = np.nan
    with pytest.raises(DomainError) as err:
        Sample(x=np.zeros((3, 1)), w=w)
    assert err.value.row == 1
    w[1, 0] = -np.inf
    w[0, 1] = np.inf
    s = Sample(x=np.zeros((3, 1)), w=w)  # censored endpoints are legal
    assert s.w[1, 0] == -np.inf


def test_sample_empty():
    s = Sample(x=np.empty((0, 1)), w=np.empty((0, 2)))
    assert s.n == 0


# ---------------------------------------------------------------------------
# CSV round trip


def test_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(11)
    x = rng.normal(size=(20, 2))
    w = rng.normal(size=(20, 3))
    w[3, 1] = np.inf
    w[7, 2] = -np.inf
    s = Sample(x=x, w=w)
    path = str(tmp_path / "sample.csv")
    save_sample_csv(path, s)
    back = load_sample_csv(path)
    assert_array_equal(back.x, s.x)  # repr() round-trips doubles exactly
    assert_array_equal(back.w, s.w)
    header = open(path).readline().strip()
    assert header == "x1,x2,w1,w2,w3"


def test_csv_round_trip_empty(tmp_path):
    path = str(tmp_path / "empty.csv")
    save_sample_csv(path, Sample(x=np.empty((0, 1)), w=np.empty((0, 2))))
    back = load_sample_csv(path)
    assert back.n == 0 and back.d_x == 1 and back.d_w == 2


def test_csv_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ConfigError) as err:
        load_sample_csv(str(path))
    assert err.value.key == "data"


def test_csv_header_only_x(tmp_path):
    path = tmp_path / "xonly.csv"
    path.write_text("x1,x2\n1,2\n")
    with pytest.raises(ConfigError):
        load_sample_csv(str(path))


def test_csv_empty_file(tmp_path):
    path = tmp_path / "nothing.csv"
    path.write_text("")
    with pytest.raises(ConfigError):
        load_sample_csv(str(path))


def test_csv_ragged_row(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("x1,w1\n1.0,2.0\n3.0\n")
    with pytest.raises(DomainError) as err:
        load_sample_csv(str(path))
    assert err.value.row == 1


def test_csv_unparseable_field(tmp_path):
    path = tmp_path / "garbage.csv"
    path.write_text("x1,w1\n1.0,zebra\n")
    with pytest.raises(DomainError) as err:
        load_sample_csv(str(path))
    assert err.value.row == 0


# ---------------------------------------------------------------------------
# kernels and instruments


def test_kernel_values():
    assert kernel_value("uniform", 0.0) == 0.5
    assert kernel_value("uniform", 1.0) == 0.5
    assert kernel_value("uniform", 1.0001) == 0.0
    assert kernel_value("epanechnikov", 0.0) == 0.75
    assert kernel_value("epanechnikov", 1.0) == 0.0
    assert_allclose(kernel_value("epanechnikov", 0.5), 0.5625)
    assert kernel_value("triangular", 0.0) == 1.0
    assert_allclose(kernel_value("triangular", -0.5), 0.5)
    with pytest.raises(ConfigError):
        kernel_value("gaussianish", 0.0)


@pytest.mark.parametrize("kid", ["uniform", "epanechnikov", "triangular"])
def test_kernel_is_a_density(kid):
    u = np.linspace(-1.5, 1.5, 300001)
    k = kernel_value(kid, u)
    assert (k >= 0).all()
    assert k.max() < np.inf
    # atol covers the trapezoid error at the uniform kernel's jump at |u| = 1
    assert_allclose(np.trapezoid(k, u), 1.0, atol=2e-5)
    assert kernel_value(kid, 0.0) > 0


def test_box_half_open_convention():
    g = Instrument(kind="box", s=(0.0,), t=(1.0,))
    x = np.array([[0.0], [0.5], [1.0], [1.5], [-0.2]])
    assert_array_equal(g.weights(x), [0.0, 1.0, 1.0, 0.0, 0.0])


def test_box_minus_inf_lower():
    g = Instrument(kind="box", s=(-np.inf,), t=(0.0,))
    x = np.array([[-5.0], [0.0], [0.1]])
    assert_array_equal(g.weights(x), [1.0, 1.0, 0.0])


def test_box_product_over_axes():
    g = Instrument(kind="box", s=(0.0, -1.0), t=(1.0, 0.0))
    x = np.array([[0.5, -0.5], [0.5, 0.5], [1.5, -0.5]])
    assert_array_equal(g.weights(x), [1.0, 0.0, 0.0])


def test_box_translation_invariance():
    rng = np.random.default_rng(5)
    for _ in range(25):
        x = rng.normal(size=(40, 1))
        a, b = sorted(rng.normal(size=2))
        shift = rng.normal()
        g0 = Instrument(kind="box", s=(a,), t=(b,))
        g1 = Instrument(kind="box", s=(a + shift,), t=(b + shift,))
        assert_array_equal(g0.weights(x), g1.weights(x + shift))


def test_kernel_dilation_weights():
    g = Instrument(kind="kernel_dilation", center=(1.0,), bandwidth=2.0,
                   kernel_id="triangular")
    x = np.array([[1.0], [2.0], [3.0], [-1.0], [4.0]])
    assert_allclose(eval_instrument(g, x), [1.0, 0.5, 0.0, 0.0, 0.0])


def test_instrument_weights_nonnegative_bounded():
    rng = np.random.default_rng(17)
    for _ in range(20):
        x = rng.normal(size=(30, 1))
        g = Instrument(kind="kernel_dilation", center=(rng.normal(),),
                       bandwidth=float(rng.uniform(0.1, 2.0)),
                       kernel_id=rng.choice(["uniform", "epanechnikov", "triangular"]))
        w = g.weights(x)
        assert (w >= 0).all() and w.max() <= 1.0


# ---------------------------------------------------------------------------
# instrument families


def test_interval_family_count_and_masks():
    x = np.array([[0.3], [0.1], [0.2], [0.3], [0.4]])  # 4 distinct values
    s = Sample(x=x, w=x.copy())
    fam = InstrumentFamily(kind="all_data_intervals")
    instruments = list(fam.instruments(s))
    k = 4
    assert len(instruments) == k * (k + 1) // 2
    masks = {tuple(g.weights(x).astype(int)) for g in instruments}
    assert len(masks) == len(instruments)  # all windows distinct
    for g in instruments:
        assert g.weights(x).sum() > 0  # no empty instrument


def test_interval_family_requires_univariate_x():
    s = Sample(x=np.zeros((3, 2)), w=np.zeros((3, 1)))
    fam = InstrumentFamily(kind="all_data_intervals")
    with pytest.raises(DimensionError):
        list(fam.instruments(s))


def test_box_family_count():
    rng = np.random.default_rng(3)
    x = rng.integers(0, 3, size=(12, 2)).astype(float)  # 3 distinct per axis
    s = Sample(x=x, w=x[:, :1].copy())
    fam = InstrumentFamily(kind="all_data_boxes")
    per_axis = 3 * 4 // 2
    assert len(list(fam.instruments(s))) == per_axis * per_axis


def test_box_family_thinning_keeps_extremes():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(40, 2))
    s = Sample(x=x, w=x[:, :1].copy())
    fam = InstrumentFamily(kind="all_data_boxes", thinning=5)
    uppers0 = sorted({g.t[0] for g in fam.instruments(s)})
    assert len(uppers0) <= 5
    assert uppers0[0] == pytest.approx(x[:, 0].min())
    assert uppers0[-1] == pytest.approx(x[:, 0].max())


def test_dilation_family_enumeration():
    fam = InstrumentFamily(kind="kernel_dilations", centers=(0.0, 1.0),
                           bandwidths=(0.5, 1.0), kernel_id="epanechnikov")
    s = Sample(x=np.zeros((2, 1)), w=np.zeros((2, 1)))
    gs = list(fam.instruments(s))
    assert len(gs) == 4
    assert {g.kernel_id for g in gs} == {"epanechnikov"}


def test_unknown_family_kind():
    fam = InstrumentFamily(kind="all_data_simplices")
    s = Sample(x=np.zeros((2, 1)), w=np.zeros((2, 1)))
    with pytest.raises(ConfigError):
        list(fam.instruments(s))


# ---------------------------------------------------------------------------
# criterion functions


def test_s_sup_norm_examples():
    s = SFunction(kind="neg_part_sup_norm")
    assert s_value(s, [-0.3, 0.2]) == pytest.approx(0.3)
    assert s_value(s, [0.4, 0.2]) == 0.0
    assert s_value(s, [0.0, 0.0]) == 0.0


def test_s_p_norm_examples():
    s = SFunction(kind="neg_part_p_norm", p=2.0)
    assert s_value(s, [-3.0, 1.0, -4.0]) == pytest.approx(5.0)
    assert s_value(s, [1.0, 2.0]) == 0.0


def test_s_positive_iff_some_negative_component():
    rng = np.random.default_rng(23)
    for kind, p in [("neg_part_sup_norm", np.inf), ("neg_part_p_norm", 1.5)]:
        s = SFunction(kind=kind, p=p)
        for _ in range(200):
            t = rng.normal(size=rng.integers(1, 6))
            assert s_value(s, t) >= 0.0
            assert (s_value(s, t) > 0) == bool((t < 0).any())


def test_s_constants_implications():
    rng = np.random.default_rng(29)
    for kind, p in [("neg_part_sup_norm", np.inf), ("neg_part_p_norm", 2.0),
                    ("neg_part_p_norm", 1.0)]:
        s = SFunction(kind=kind, p=p)
        for _ in range(300):
            t = rng.normal(size=4)
            k1, k2 = s.constants(t.size)
            c = s_value(s, t)
            if c > 0:
                assert t.min() <= -c * k1 + 1e-12
            assert t.min() >= -c * k2 - 1e-12


def test_s_vectorized_batch():
    s = SFunction(kind="neg_part_sup_norm")
    batch = np.array([[-1.0, 2.0], [3.0, 4.0], [-0.5, -2.0]])
    assert_allclose(s.value(batch), [1.0, 0.0, 2.0])


def test_s_bad_config():
    with pytest.raises(ConfigError):
        SFunction(kind="hinge")
    with pytest.raises(ConfigError):
        SFunction(kind="neg_part_p_norm", p=0.5)
    with pytest.raises(ConfigError):
        SFunction(kind="neg_part_p_norm", p=np.inf)
