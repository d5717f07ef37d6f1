import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hardylab.forms import (
    HardyReport,
    JumpKernel,
    MissingGradient,
    NoLimitDetected,
    PreconditionError,
    TestFunction,
    annular_bump,
    comparable_kernel_bound,
    dirichlet_form,
    form_Et,
    form_limit,
    fourier_form,
    gaussian_bump,
    hardy_verify,
    hat,
    jump_form,
    remainder_jump,
    remainder_limit,
    remainder_term,
    smoothed_power,
    standard_battery,
    tabulated_weight,
    weighted_l2,
    zero_function,
)
from hardylab.kernels import GaussianKernel, LevySymbol, ModulatedKernel, StableKernel
from hardylab.special import levy_normalizer
from hardylab.supermedian import AtomicMeasure, SupermedianPair, TimeWeight

CAUCHY1 = StableKernel(1.0, 1)
CAUCHY3 = StableKernel(1.0, 3)
NU1 = JumpKernel.stable(1, 1.0)
NU3 = JumpKernel.stable(3, 1.0)


# --- test functions ---------------------------------------------------------

def test_battery_layout():
    b = standard_battery(3, 1.0)
    assert [u.family for u in b] == ["gaussian_bump"] * 3 + ["smoothed_power"] * 2 + ["hat"]
    for u in b:
        assert u.check_lipschitz() > 0


def test_gaussian_bump_fourier_matches_fft():
    from hardylab.forms import _fourier_profile_fft
    u = gaussian_bump(3, 1.0)
    k, uh = _fourier_profile_fft(u)
    sel = k < 4
    np.testing.assert_allclose(uh[sel], u.fourier(k[sel]), atol=1e-10 * float(u.fourier(np.array([0.0]))[0]))


def test_smoothed_power_shape():
    u = smoothed_power(3, 1.0, 0.1, 10.0)
    r = np.array([0.2, 1.0, 5.0])
    np.testing.assert_allclose(u.radial(r), r**-1.0, rtol=1e-12)
    assert u.radial(np.array([1e-3, 100.0])).tolist() == [0.0, 0.0]


def test_non_l2_rejected():
    const = TestFunction(profile=lambda r: np.ones_like(r), derivative=lambda r: np.zeros_like(r), d=3,
                         tag="const", family="custom", support=(0.0, math.inf), feature=1.0)
    with pytest.raises(PreconditionError):
        dirichlet_form(const)
    with pytest.raises(PreconditionError):
        jump_form(NU3, const)


def test_missing_gradient():
    u = TestFunction(profile=lambda r: np.exp(-r * r), d=3, tag="nograd", family="custom",
                     support=(0.0, math.inf), feature=1.0)
    with pytest.raises(MissingGradient):
        dirichlet_form(u)


# --- E^(t) and its limit ---------------------------------------------------------

def test_form_et_zero():
    assert form_Et(CAUCHY3, zero_function(3), 0.5) == 0.0


def test_form_et_gaussian_closed_form():
    # u = e^{-x^2/2}: <u, g_t u> = sqrt(pi / (1 + t)), |u|^2 = sqrt(pi)
    u = gaussian_bump(1, 1.0)
    k = GaussianKernel(1)
    for t in (0.1, 0.5, 2.0):
        exact = (math.sqrt(math.pi) - math.sqrt(math.pi / (1 + t))) / t
        assert form_Et(k, u, t) == pytest.approx(exact, rel=1e-8)


def test_form_et_killed_gaussian_defect():
    u = gaussian_bump(1, 1.0)
    k = GaussianKernel(1, killing_rate=0.3)
    t = 0.5
    exact = (math.sqrt(math.pi) - math.exp(-0.3 * t) * math.sqrt(math.pi / (1 + t))) / t
    assert form_Et(k, u, t) == pytest.approx(exact, rel=1e-8)


@pytest.mark.parametrize("k", [GaussianKernel(3), CAUCHY3, CAUCHY1], ids=["gauss3", "cauchy3", "cauchy1"])
def test_form_et_monotone(k):
    u = gaussian_bump(k.d, 1.0)
    vals = [form_Et(k, u, t) for t in (2.0, 1.0, 0.5, 0.25, 0.125)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


@given(a=st.floats(-4, 4).filter(lambda a: abs(a) > 1e-3), sigma=st.floats(0.3, 3.0))
def test_form_et_quadratic(a, sigma):
    u = gaussian_bump(1, sigma)
    e = form_Et(CAUCHY1, u, 0.4)
    assert form_Et(CAUCHY1, u.scaled(a), 0.4) == pytest.approx(a * a * e, rel=1e-10)


def test_form_limit_matches_jump_d1():
    u = gaussian_bump(1, 1.0)
    lim = form_limit(CAUCHY1, u)
    assert lim.monotone
    assert lim.value == pytest.approx(jump_form(NU1, u), rel=1e-2)


def test_form_limit_matches_dirichlet():
    u = annular_bump(3, 0.5, 2.0)
    assert form_limit(GaussianKernel(3), u).value == pytest.approx(dirichlet_form(u), rel=1e-2)


def test_form_limit_zero():
    assert form_limit(CAUCHY3, zero_function(3)).value == 0.0


def test_form_limit_rejects_non_monotone():
    class Noisy(GaussianKernel):
        def radial(self, t, r):
            return super().radial(t, r) * (1 + 0.3 * math.sin(40 * math.log(t)))
    with pytest.raises(NoLimitDetected):
        form_limit(Noisy(1), gaussian_bump(1, 1.0))


# --- jump, Fourier and gradient forms -----------------------------------------

def test_jump_form_zero():
    assert jump_form(NU3, zero_function(3)) == 0.0


def test_jump_form_hat_against_riemann_sum():
    u = hat(1, 1.0)
    L, n = 3.0, 2000
    h = 2 * L / n
    x = -L + h * (np.arange(n) + 0.5)
    ux = u.radial(np.abs(x))
    D = np.abs(np.subtract.outer(x, x))
    np.fill_diagonal(D, np.inf)
    inner = 0.5 * np.sum(np.subtract.outer(ux, ux) ** 2 / (math.pi * D**2)) * h * h
    outside = np.sum(ux**2 / math.pi * (1 / (L - x) + 1 / (L + x))) * h
    assert jump_form(NU1, u) == pytest.approx(inner + outside, rel=5e-3)


@given(lam=st.floats(0.25, 4.0))
def test_jump_form_dilation(lam):
    u = gaussian_bump(3, 1.0)
    assert jump_form(NU3, u.dilated(lam)) == pytest.approx(lam ** (3 - 1.0) * jump_form(NU3, u), rel=1e-2)


def test_jump_form_dilation_general_alpha():
    nu = JumpKernel.stable(3, 1.5)
    u = annular_bump(3, 0.5, 2.0)
    assert jump_form(nu, u.dilated(2.0)) == pytest.approx(2 ** (3 - 1.5) * jump_form(nu, u), rel=1e-2)


def test_fourier_form_routes():
    u = gaussian_bump(3, 1.0)
    assert fourier_form(lambda k: k * k, u) == pytest.approx(dirichlet_form(u), rel=1e-9)
    u1 = gaussian_bump(1, 1.0)
    assert fourier_form(LevySymbol.power(1.0), u1) == pytest.approx(jump_form(NU1, u1), rel=1e-2)
    assert fourier_form(lambda k: k, zero_function(3)) == 0.0


def test_fourier_form_fft_route():
    # annular bumps have no closed-form transform: FFT route against the gradient form
    u = annular_bump(3, 0.5, 2.0)
    assert fourier_form(lambda k: k * k, u) == pytest.approx(dirichlet_form(u), rel=5e-3)
    u = hat(3, 1.0)
    assert fourier_form(lambda k: k, u) == pytest.approx(jump_form(NU3, u), rel=1e-2)


def test_dirichlet_examples():
    assert dirichlet_form(gaussian_bump(3, 1.0)) == pytest.approx(1.5 * math.pi**1.5, rel=1e-9)
    assert dirichlet_form(hat(3, 1.0)) == pytest.approx(4 * math.pi / 3, rel=1e-9)


# --- remainder -----------------------------------------------------------------

def test_remainder_vanishes_for_multiples_of_h():
    h = lambda r: np.exp(-np.asarray(r) ** 2)
    u = gaussian_bump(3, math.sqrt(0.5)).scaled(3.0)  # 3 e^{-r^2} = 3 h
    assert remainder_term(CAUCHY3, h, u, 0.1) == pytest.approx(0.0, abs=1e-12)


def test_remainder_limit_matches_jump():
    pair = SupermedianPair.closed_form_stable(3, 1.0, 1.0)
    u = annular_bump(3, 0.5, 2.0)
    lim = remainder_limit(CAUCHY3, pair.h_radial, u)
    assert all(j >= 0 for j in lim.e_values)
    assert lim.value == pytest.approx(remainder_jump(NU3, pair.h_radial, u), rel=2e-2)


# --- Hardy reports -------------------------------------------------------------------

def test_hardy_equality_annular_cauchy():
    pair = SupermedianPair.closed_form_stable(3, 1.0, 1.0)
    rep = hardy_verify(CAUCHY3, pair, annular_bump(3, 0.5, 2.0))
    assert rep.passed
    assert rep.relative_residual <= 0.02
    d = json.loads(rep.to_json())
    assert set(d) >= {"kernel", "beta", "u_tag", "lhs", "weighted", "remainder", "residual", "margins",
                      "tolerances", "pass"}


def test_hardy_equality_laplacian():
    pair = SupermedianPair.closed_form_gaussian(3, 0.5)
    for u in (annular_bump(3, 0.5, 2.0), annular_bump(3, 0.2, 1.0), gaussian_bump(3, 1.0)):
        rep = hardy_verify(GaussianKernel(3), pair, u)
        assert rep.relative_residual <= 0.01
        assert rep.weighted == pytest.approx(0.25 * weighted_l2(u, lambda r: 1 / r**2), rel=1e-12)


def test_hardy_route_agreement_limit():
    pair = SupermedianPair.closed_form_stable(3, 1.0, 1.0)
    u = gaussian_bump(3, 1.0)
    a = hardy_verify(CAUCHY3, pair, u, lhs_route="jump")
    b = hardy_verify(CAUCHY3, pair, u, lhs_route="limit")
    assert b.lhs == pytest.approx(a.lhs, rel=2e-2)


def test_hardy_precondition():
    # gamma = d - 2 puts h at infinity everywhere
    pair = SupermedianPair.numeric(GaussianKernel(3), TimeWeight(0.5), AtomicMeasure.dirac(3))
    with pytest.raises(PreconditionError):
        hardy_verify(GaussianKernel(3), pair, annular_bump(3, 0.5, 2.0))


def test_optimality_probe():
    # the optimal constant inflated by 10% fails on a near-extremal profile
    pair = SupermedianPair.closed_form_stable(3, 1.0, 1.0)
    u = smoothed_power(3, 1.0, eps=1e-2, R=1e2, width=math.log(8.0))
    rep = hardy_verify(CAUCHY3, pair, u, mode="inequality")
    assert rep.lhs - 1.1 * rep.weighted < 0
    assert rep.inequality_margin > 0


def test_comparable_bound_arithmetic():
    rep = HardyReport("k", 1.0, "u", lhs=10.0, weighted=4.0, remainder=6.0, residual=0.0)
    same = comparable_kernel_bound(1.0, rep)
    assert same.weighted == rep.weighted
    adj = comparable_kernel_bound(2.0, rep)
    assert adj.inequality_margin - rep.inequality_margin == pytest.approx(0.75 * rep.weighted)
    assert adj.mode == "inequality"
    with pytest.raises(ValueError):
        comparable_kernel_bound(0.5, rep)


@pytest.mark.slow
def test_comparable_kernel_inequality():
    # q-bar from a kernel comparable to the Cauchy kernel within c = 2
    c = 2.0
    mod = ModulatedKernel(CAUCHY3, lambda t, r: 1.25 + 0.75 * np.sin(np.log(t) + 2 * np.log1p(r)), c, "sin")
    bar = SupermedianPair.numeric(mod, TimeWeight(1.0), AtomicMeasure.dirac(3))
    qbar = tabulated_weight(bar.q_radial, np.geomspace(0.45, 2.2, 9))
    pair = SupermedianPair.closed_form_stable(3, 1.0, 1.0)
    u = annular_bump(3, 0.5, 2.0)
    rep = hardy_verify(CAUCHY3, pair, u)
    r = np.array([0.5, 1.0, 2.0])
    ratio = qbar(r) / pair.q_radial(r)
    assert np.all(ratio >= c**-2) and np.all(ratio <= c**2)
    assert rep.lhs - weighted_l2(u, qbar) / c**2 >= 0
