import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hardylab.kernels import GaussianKernel, StableKernel
from hardylab.perturbation import (
    SingularNode,
    SpaceTimeGrid,
    cell_mass_matrix,
    discretize,
    extend,
    grid_tolerance,
    nonexplosion_check,
    run_series,
)
from hardylab.supermedian import SupermedianPair

G1 = GaussianKernel(1)


def const(c):
    return lambda x: np.full_like(np.asarray(x, dtype=float), c)


def cut(q, r_min):
    """q switched off on the innermost ball; a smaller weight only lowers every term."""
    return lambda r: np.where(r > r_min, q(np.maximum(r, r_min)), 0.0)


# --- grids ----------------------------------------------------------------------

def test_grid_validation():
    with pytest.raises(ValueError):
        SpaceTimeGrid(np.array([0.0, 1.0]), np.array([1.0]), np.array([0.0, 1.0]), 1, "line")
    with pytest.raises(ValueError):
        SpaceTimeGrid(np.array([0.0, 1.0]), np.array([0.5]), np.array([0.0, 1.0, 3.0]), 1, "line")
    g = SpaceTimeGrid.radial(0.01, 10.0, 20, 1.0, 4)
    assert np.all(g.weights > 0)
    assert g.weights.sum() == pytest.approx(4 * math.pi / 3 * 1000.0)
    with pytest.raises(ValueError):
        g.nodes[0] = 1.0


def test_cell_masses():
    g = SpaceTimeGrid.line(10.0, 100, 1.0, 4)
    np.testing.assert_array_equal(cell_mass_matrix(G1, 0.0, g), np.eye(100))
    P = cell_mass_matrix(G1, 1.0, g)
    assert np.all(P >= 0)
    x = g.nodes[50]  # g_1 has variance 2
    inside = 0.5 * (math.erf((10.0 - x) / 2) + math.erf((10.0 + x) / 2))
    assert P[50].sum() == pytest.approx(inside, abs=1e-13)
    gr = SpaceTimeGrid.radial(0.01, 100.0, 60, 1.0, 4)
    Pr = cell_mass_matrix(StableKernel(1.0, 3), 1.0, gr)
    # P(|X| <= R) = (2/pi)(arctan R - R/(1+R^2)) for the d=3 Cauchy law at t=1 from the origin
    R = 100.0
    assert Pr[0].sum() == pytest.approx(2 / math.pi * (math.atan(R) - R / (1 + R * R)), abs=1e-6)
    assert np.all(Pr >= 0)


# --- discretize / extend ---------------------------------------------------------

def test_zero_potential_is_degenerate():
    g = SpaceTimeGrid.line(6.0, 40, 1.0, 4)
    s = discretize(G1, const(0.0), g)
    extend(s, 3)
    assert s.truncation_index == 3
    assert all(not np.any(T) for T in s.terms[1:])
    np.testing.assert_array_equal(s.partial_sum(), s.kernel_matrices)


def test_singular_node():
    g = SpaceTimeGrid.line(5.0, 41, 1.0, 4)  # odd cell count puts a node at 0
    with pytest.raises(SingularNode):
        discretize(G1, lambda x: 1.0 / np.asarray(x) ** 2, g)
    with pytest.raises(ValueError):
        discretize(G1, const(-1.0), g)


def test_inverse_square_on_radial_grid_is_finite():
    g = SpaceTimeGrid.radial(0.01, 30.0, 30, 1.0, 4)
    s = discretize(GaussianKernel(3), lambda r: 0.25 / np.asarray(r) ** 2, g)
    extend(s, 1)
    assert all(np.all(np.isfinite(T)) for T in s.terms)


def test_first_term_is_t_times_kernel():
    g = SpaceTimeGrid.line(8.0, 160, 1.0, 16)
    s = discretize(G1, const(1.0), g)
    extend(s, 1)
    P, T1 = s.kernel_matrices[-1], s.terms[1][-1]
    c = np.abs(g.nodes) < 4
    assert np.max(np.abs(T1 - 1.0 * P)[np.ix_(c, c)]) / np.max(P) < 1e-3


def test_constant_potential_oracle():
    c, t_max = 0.25, 1.0
    g = SpaceTimeGrid.line(10.0, 160, t_max, 16)
    s = discretize(G1, const(c), g)
    extend(s, 3)
    P = s.kernel_matrices[-1]
    target = math.exp(c * t_max) * P
    central = np.abs(g.nodes) <= 5.0
    err = np.max(np.abs(s.partial_sum(3)[-1] - target)[np.ix_(central, central)]) / np.max(target)
    half = s.kernel_matrices[len(g.times) // 2]
    ck = np.max(np.abs(half @ half - P)[np.ix_(central, central)]) / np.max(target)
    tail = math.exp(c * t_max) - sum((c * t_max) ** n / math.factorial(n) for n in range(4))
    assert err <= ck + tail


def test_refinement_converges():
    errs = []
    g = SpaceTimeGrid.line(8.0, 80, 1.0, 8)
    for grid in (g, g.refined()):
        s = discretize(G1, const(0.5), grid)
        extend(s, 1)
        P, T1 = s.kernel_matrices[-1], s.terms[1][-1]
        c = np.abs(grid.nodes) < 4
        errs.append(np.max(np.abs(T1 - 0.5 * P)[np.ix_(c, c)]) / np.max(P))
    assert errs[1] < errs[0] / 2  # at least first order in the step


def test_terms_nonnegative_and_symmetric():
    g = SpaceTimeGrid.line(8.0, 120, 1.0, 12)
    q = lambda x: 0.4 / (1 + np.asarray(x) ** 2)
    s = discretize(G1, q, g)
    extend(s, 3)
    tol = grid_tolerance(s, G1, lambda x: np.exp(-np.asarray(x) ** 2 / 8), -1)
    for T in s.terms:
        assert np.all(T >= 0)
        M = T[-1]
        assert np.max(np.abs(M - M.T)) <= 5 * tol * np.max(M)
    sums = s.partial_sums
    assert all(np.all(b >= a) for a, b in zip(sums, sums[1:]))


def test_csv_dump(tmp_path):
    g = SpaceTimeGrid.line(3.0, 6, 1.0, 2)
    s = discretize(G1, const(0.1), g)
    extend(s, 1)
    p = tmp_path / "series.csv"
    s.to_csv(p)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["term", "t_index", "x_index", "y_index", "value"]
    assert len(rows) == 1 + 2 * 3 * 6 * 6


@given(c=st.floats(0.0, 0.5))
def test_partial_sums_grow_with_c(c):
    g = SpaceTimeGrid.line(5.0, 30, 0.5, 4)
    lo = discretize(G1, const(c), g)
    hi = discretize(G1, const(c + 0.1), g)
    extend(lo, 2)
    extend(hi, 2)
    assert np.all(hi.partial_sum() >= lo.partial_sum() - 1e-15)


# --- non-explosion -------------------------------------------------------------------

def test_killed_gaussian_nonexplosion():
    pair = SupermedianPair.closed_form_killed_gaussian(1.0)
    g = SpaceTimeGrid.line(12.0, 120, 1.0, 16)
    h = lambda x: pair.h_radial(np.abs(x))
    s = discretize(pair.kernel, lambda x: pair.q_radial(np.abs(x)), g)
    run_series(s, 1e-8, 8)
    tol = grid_tolerance(s, pair.kernel, h, -1)
    rep = nonexplosion_check(s, h(g.nodes), -1)
    assert rep.holds(tol, 5.0)
    assert not rep.growth_flag


def test_subcritical_cauchy_margin():
    pair = SupermedianPair.closed_form_stable(3, 1.0, 1.0)
    g = SpaceTimeGrid.radial(0.01, 100.0, 80, 1.0, 16)
    s = discretize(pair.kernel, cut(lambda r: 0.5 * pair.q_radial(r), 0.01), g)
    run_series(s, 1e-8, 4)
    tol = grid_tolerance(s, pair.kernel, pair.h_radial, -1)
    rep = nonexplosion_check(s, pair.h_radial(g.nodes), -1)
    assert rep.min_relative_margin >= -tol


def test_gaussian_radial_margin():
    pair = SupermedianPair.closed_form_gaussian(3, 0.5)
    g = SpaceTimeGrid.radial(0.01, 30.0, 80, 1.0, 16)
    s = discretize(pair.kernel, cut(pair.q_radial, 0.01), g)
    run_series(s, 1e-8, 8)
    tol = grid_tolerance(s, pair.kernel, pair.h_radial, -1)
    rep = nonexplosion_check(s, pair.h_radial(g.nodes), -1)
    assert rep.min_relative_margin >= -tol


def test_supercritical_flagged():
    pair = SupermedianPair.closed_form_stable(3, 1.0, 1.0)
    g = SpaceTimeGrid.radial(0.01, 100.0, 60, 1.0, 12)
    s = discretize(pair.kernel, cut(lambda r: 4.0 * pair.q_radial(r), 0.01), g)
    run_series(s, 1e-8, 8)
    rep = nonexplosion_check(s, pair.h_radial(g.nodes), -1)
    assert rep.growth_flag
    assert rep.min_relative_margin < -1.0
    with pytest.raises(ValueError):
        nonexplosion_check(s, np.full(len(g.nodes), np.inf), -1)
