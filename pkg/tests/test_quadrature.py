import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hardylab.quadrature import (
    NonConvergent,
    NonFinite,
    QuadratureConfig,
    UnsupportedDimension,
    integrate_fourier_radial,
    integrate_improper,
    integrate_interval,
    integrate_radial,
    sphere_area,
)


def test_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(rel_tol=0)
    with pytest.raises(ValueError):
        QuadratureConfig(abs_tol=-1)
    with pytest.raises(ValueError):
        QuadratureConfig(max_subdivisions=0)
    with pytest.raises(ValueError):
        QuadratureConfig(split_points=(2.0, 1.0))
    assert QuadratureConfig().with_splits([3.0, 1.0, 1.0, math.inf]).split_points == (1.0, 3.0)


def test_exponential():
    res = integrate_improper(lambda t: np.exp(-t))
    assert res.converged
    assert abs(res.value - 1.0) < 1e-9
    assert res.error_estimate <= max(1e-12, 1e-9 * abs(res.value))


def test_half_gamma():
    res = integrate_improper(lambda t: np.sqrt(t) * np.exp(-t))
    assert res.value == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-9)


def test_divergent_reported():
    with pytest.raises(NonConvergent):
        integrate_improper(lambda t: 1.0 / t)
    res = integrate_improper(lambda t: 1.0 / t, raise_on_failure=False)
    assert not res.converged


def test_nonfinite_reported():
    with pytest.raises(NonFinite):
        integrate_interval(lambda t: np.where(t > 0.5, np.nan, 1.0), 0.0, 1.0)


@pytest.mark.parametrize("s", [0.5, 1.5, 2.5, 4.0])
def test_gamma_consistency(s):
    res = integrate_improper(lambda t: t ** (s - 1) * np.exp(-t))
    assert res.value == pytest.approx(math.exp(math.lgamma(s)), rel=1e-9)


def test_radial_examples():
    assert integrate_radial(lambda r: np.exp(-r * r), 3).value == pytest.approx(math.pi**1.5, rel=1e-9)
    heat = lambda r: (4 * math.pi) ** -1.5 * np.exp(-r * r / 4)
    assert integrate_radial(heat, 3).value == pytest.approx(1.0, rel=1e-9)
    cfg = QuadratureConfig(split_points=(1.0,))
    inv_sq = lambda r: np.where(r < 1, 1.0 / np.maximum(r, 1e-300) ** 2, 0.0)
    assert integrate_radial(inv_sq, 3, cfg).value == pytest.approx(4 * math.pi, rel=1e-9)


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2.0)
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_fourier_examples():
    v = integrate_fourier_radial(lambda k: np.exp(-k * k), 1, 0.0).value
    assert v == pytest.approx(math.sqrt(math.pi) / (2 * math.pi), rel=1e-9)
    for t, x in [(1.0, 0.0), (0.5, 1.3), (2.0, 3.0)]:
        v = integrate_fourier_radial(lambda k: np.exp(-t * k), 1, x).value
        assert v == pytest.approx(t / (math.pi * (t * t + x * x)), rel=1e-8)
    assert integrate_fourier_radial(lambda k: np.zeros_like(k), 3, 1.0).value == 0.0
    # d=3 Gaussian pair e^{-|k|^2} <-> (4 pi)^{-3/2} e^{-r^2/4}
    v = integrate_fourier_radial(lambda k: np.exp(-k * k), 3, 1.5).value
    assert v == pytest.approx((4 * math.pi) ** -1.5 * math.exp(-1.5**2 / 4), rel=1e-8)
    with pytest.raises(UnsupportedDimension):
        integrate_fourier_radial(lambda k: np.exp(-k), 0, 1.0)


@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_linearity(a, b):
    f = lambda t: np.exp(-t) * (1 + np.sin(t))
    g = lambda t: t * np.exp(-2 * t)
    lhs = integrate_improper(lambda t: a * f(t) + b * g(t)).value
    rhs = a * integrate_improper(f).value + b * integrate_improper(g).value
    assert abs(lhs - rhs) <= 10 * 1e-9 * max(1.0, abs(lhs)) + 1e-12


# kinks of |cos t| where e^{-t} is still above 1e-18; the contract is that kinks are declared
COS_KINKS = tuple(math.pi / 2 + k * math.pi for k in range(14))


@given(p=st.floats(0.05, 20.0))
def test_split_invariance_smooth(p):
    f = lambda t: np.exp(-t) * np.cos(t) ** 2
    base = integrate_improper(f)
    split = integrate_improper(f, QuadratureConfig(split_points=(p,)))
    assert abs(base.value - split.value) <= base.error_estimate + split.error_estimate + 1e-13


@given(p=st.floats(0.05, 20.0))
def test_split_invariance_declared_kinks(p):
    f = lambda t: np.exp(-t) * np.abs(np.cos(t))
    cfg = QuadratureConfig(split_points=COS_KINKS)
    base = integrate_improper(f, cfg)
    split = integrate_improper(f, cfg.with_splits([p]))
    assert abs(base.value - split.value) <= base.error_estimate + split.error_estimate + 1e-13
    assert abs(split.value - 0.717268604047347897188) <= split.error_estimate + 1e-13
