import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flowbandits.probit import (
    phi_cdf,
    phi_cdf_array,
    phi_inv,
    phi_pdf,
    v_correction,
    v_correction_array,
    w_correction,
    w_correction_array,
)

from oracles import mp_v, mp_w

GRID = np.round(np.arange(-40.0, 40.0 + 1e-9, 0.01), 10)


@pytest.mark.parametrize(
    "t, expected",
    [(0.0, 0.3989422804014327), (1.0, 0.24197072451914337), (-1.0, 0.24197072451914337)],
)
def test_phi_pdf(t, expected):
    assert phi_pdf(t) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize(
    "t, expected",
    [(0.0, 0.5), (1.2815515655446004, 0.9), (-10.0, 7.619853024160526e-24)],
)
def test_phi_cdf(t, expected):
    assert phi_cdf(t) == pytest.approx(expected, rel=1e-12)


def test_phi_cdf_lower_tail_is_relative_accurate():
    # 1 - phi_cdf(37) is exactly 0 in float64
    assert phi_cdf(-37.0) > 0
    assert phi_cdf(-37.0) == pytest.approx(5.7255712225245768e-300, rel=1e-12)


@pytest.mark.parametrize("p, expected", [(0.5, 0.0), (0.9, 1.2815515655446004), (0.1, -1.2815515655446004)])
def test_phi_inv(p, expected):
    assert phi_inv(p) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_phi_inv_domain(p):
    with pytest.raises(ValueError):
        phi_inv(p)


@pytest.mark.parametrize("t", [0.0, -10.0, 5.0, -30.0])
def test_v_against_mpmath(t):
    assert v_correction(t) == pytest.approx(float(mp_v(t)), rel=1e-12)


@pytest.mark.parametrize(
    "t, expected",
    [
        (0.0, 0.6366197723675814),
        # 50-digit mpmath values
        (-10.0, 0.99055462217434373884),
        (5.0, 7.4336019148607112465e-6),
        (-30.0, 0.998896228488109909),
    ],
)
def test_w_frozen(t, expected):
    assert w_correction(t) == pytest.approx(expected, rel=1e-10)


def test_v_zero_is_twice_pdf():
    assert v_correction(0.0) == pytest.approx(2 * phi_pdf(0.0), rel=1e-15)
    assert w_correction(0.0) == pytest.approx(2 / math.pi, rel=1e-15)


def test_grid_symmetry_and_bounds():
    cdf = np.array([phi_cdf(t) for t in GRID])
    cdf_neg = np.array([phi_cdf(-t) for t in GRID])
    assert np.max(np.abs(cdf + cdf_neg - 1.0)) <= 1e-12
    v = v_correction_array(GRID)
    w = w_correction_array(GRID)
    assert np.all(v + GRID > 0)
    assert np.all((w > 0) & (w < 1))


def test_array_versions_match_scalars():
    ts = np.linspace(-35, 35, 701)
    assert np.allclose(phi_cdf_array(ts), [phi_cdf(t) for t in ts], rtol=1e-12, atol=0)
    assert np.allclose(v_correction_array(ts), [v_correction(t) for t in ts], rtol=1e-12, atol=0)
    assert np.allclose(w_correction_array(ts), [w_correction(t) for t in ts], rtol=1e-12, atol=0)


def test_tails_relative_to_mpmath():
    import mpmath as mp

    for t in np.linspace(-37, 8, 91):
        assert phi_cdf(t) == pytest.approx(float(mp.ncdf(t)), rel=1e-12)


def test_inverse_round_trip():
    ps = np.logspace(-6, np.log10(1 - 1e-6), 400)
    ps = np.concatenate([ps, 1 - ps])
    err = max(abs(phi_cdf(phi_inv(p)) - p) for p in ps)
    assert err <= 1e-10


@given(st.floats(-40, 40), st.floats(-40, 40))
def test_w_monotone_decreasing(a, b):
    lo, hi = min(a, b), max(a, b)
    # below float64 range the floor makes w flat, not increasing
    assert w_correction(lo) >= w_correction(hi) * (1 - 1e-12)


@given(st.floats(-1e3, 1e3))
def test_outputs_finite(t):
    for f in (phi_pdf, phi_cdf, v_correction, w_correction):
        assert math.isfinite(f(t))
    assert phi_pdf(t) > 0 and v_correction(t) > 0 and w_correction(t) > 0
