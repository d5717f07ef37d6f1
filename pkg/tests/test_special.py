import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from hardylab.special import (
    DomainError,
    StableParams,
    constant_bundle,
    gaussian_h_prefactor,
    hardy_constant_laplacian,
    hardy_constant_stable,
    hardy_constant_stable_max,
    levy_normalizer,
    lgamma,
    optimal_beta,
    stable_h_prefactor,
)

mp.mp.dps = 30


def test_lgamma_values():
    assert lgamma(1.0) == 0.0
    assert lgamma(0.5) == pytest.approx(math.log(math.sqrt(math.pi)), rel=1e-14)
    assert lgamma(4.0) == pytest.approx(math.log(6.0), rel=1e-14)
    with pytest.raises(DomainError):
        lgamma(0.0)
    with pytest.raises(DomainError):
        lgamma(-1.5)


@given(s=st.floats(1e-3, 150.0))
def test_lgamma_against_mpmath(s):
    assert lgamma(s) == pytest.approx(float(mp.loggamma(s)), rel=1e-13, abs=1e-13)


def _levy_mp(d, a):
    return 2**a * mp.gamma((d + a) / 2) * mp.pi ** (-d / 2) / abs(mp.gamma(-a / 2))


def test_levy_normalizer():
    assert levy_normalizer(1, 1.0) == pytest.approx(1 / math.pi, rel=1e-13)
    for d, a in [(2, 1.0), (3, 0.5), (3, 1.5), (1, 1.9)]:
        assert levy_normalizer(d, a) == pytest.approx(float(_levy_mp(d, mp.mpf(a))), rel=1e-12)
    # -alpha/2 -> -1 is a pole of Gamma, so the normalizer vanishes as alpha -> 2
    vals = [levy_normalizer(3, a) for a in (1.9, 1.99, 1.999)]
    assert vals[0] > vals[1] > vals[2] > 0
    assert vals[2] == pytest.approx(float(_levy_mp(3, mp.mpf("1.999"))), rel=1e-11)
    with pytest.raises(DomainError):
        levy_normalizer(3, 2.0)


def _hardy_mp(d, a, b):
    a, b = mp.mpf(a), mp.mpf(b)
    return (2**a * mp.gamma(d / mp.mpf(2) - a * b / 2) * mp.gamma(a * (b + 1) / 2)
            / (mp.gamma(d / mp.mpf(2) - a * (b + 1) / 2) * mp.gamma(a * b / 2)))


def test_hardy_constant_examples():
    assert hardy_constant_stable(StableParams(3, 1.0, 1.0)) == pytest.approx(2 / math.pi, rel=1e-13)
    assert hardy_constant_stable(StableParams(3, 1.0, 0.0)) == 0.0
    g = math.gamma
    assert hardy_constant_stable(StableParams(2, 1.0, 0.5)) == pytest.approx(2 * g(0.75) ** 2 / g(0.25) ** 2, rel=1e-13)
    assert hardy_constant_stable(StableParams(2, 1.0, 0.5)) == pytest.approx(0.228473, rel=1e-5)


@given(d=st.sampled_from([1, 2, 3, 4]), a=st.floats(0.1, 1.9), frac=st.floats(0.01, 0.99))
def test_hardy_constant_against_mpmath(d, a, frac):
    if a >= d:
        return
    b = frac * (d / a - 1)
    assert hardy_constant_stable(StableParams(d, a, b)) == pytest.approx(float(_hardy_mp(d, a, b)), rel=1e-11)


def test_laplacian_constant():
    assert hardy_constant_laplacian(4, 1.0) == 1.0
    assert hardy_constant_laplacian(3, 0.5) == 0.25
    assert hardy_constant_laplacian(3, 0.0) == 0.0
    with pytest.raises(DomainError):
        hardy_constant_laplacian(3, 2.0)
    with pytest.raises(DomainError):
        hardy_constant_laplacian(2, 0.0)


@given(d=st.integers(3, 9), frac=st.floats(0, 1))
def test_laplacian_symmetry(d, frac):
    g = frac * (d - 2)
    # d - 2 - (d - 2 - g) need not round back to g, so allow a few ulps
    assert hardy_constant_laplacian(d, g) == pytest.approx(hardy_constant_laplacian(d, d - 2 - g), rel=1e-14, abs=4e-16 * (d - 2) ** 2)


def test_h_prefactor_examples():
    with pytest.raises(DomainError):
        stable_h_prefactor(StableParams(3, 2.0, 0.0))
    assert stable_h_prefactor(StableParams(3, 1.0, 0.0)) == pytest.approx(1 / (2 * math.pi**2), rel=1e-13)
    assert stable_h_prefactor(StableParams(1, 0.5, 0.0)) == pytest.approx(4**-0.25 / math.sqrt(math.pi), rel=1e-13)
    with pytest.raises(DomainError):
        stable_h_prefactor(StableParams(3, 1.0, 2.0))


def test_optimum_and_scan():
    for d, a in [(3, 1.0), (3, 0.5), (2, 1.0), (1, 0.5), (5, 1.7)]:
        b_opt = optimal_beta(d, a)
        assert b_opt == pytest.approx((d - a) / (2 * a))
        cmax = 4 ** (a / 2) * math.gamma((d + a) / 4) ** 2 / math.gamma((d - a) / 4) ** 2
        assert hardy_constant_stable_max(d, a) == pytest.approx(cmax, rel=1e-12)
        grid = np.linspace(0, d / a - 1, 401)[:-1]
        vals = [hardy_constant_stable(StableParams(d, a, b)) for b in grid]
        assert abs(grid[int(np.argmax(vals))] - b_opt) <= grid[1] - grid[0]


def test_alpha_to_two_limit():
    d = 3
    devs = []
    for a in (1.9, 1.99, 1.999):
        c = hardy_constant_stable(StableParams(d, a, (d - a) / (2 * a)))
        devs.append(abs(c - (d - 2) ** 2 / 4) / ((d - 2) ** 2 / 4))
    assert devs[0] > devs[1] > devs[2]


def test_gaussian_prefactor_and_bundle():
    # 4^{-gamma/2-1} pi^{-d/2} Gamma(d/2 - gamma/2 - 1) for d=3, gamma=1/2
    expect = 4 ** (-1.25) * math.pi**-1.5 * math.gamma(1.5 - 0.25 - 1)
    assert gaussian_h_prefactor(3, 0.5) == pytest.approx(expect, rel=1e-13)
    b = constant_bundle(StableParams(3, 1.0, 1.0))
    assert b.C_hardy == pytest.approx(2 / math.pi)
    assert b.A_d_minus_alpha == pytest.approx(levy_normalizer(3, 1.0))
    assert constant_bundle(StableParams(3, 1.0, 0.0)).C_hardy == 0.0
