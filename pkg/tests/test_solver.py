import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import polynomial as P

from conftest import quartic_angelesco
from extsource.curve import discriminant, mclaughlin_curve
from extsource.measures import (EvenPolynomial, MeasureError, RealMeasure, cauchy_transform,
                                composite_gauss_legendre)
from extsource.quartic import d6
from extsource.solver import (SolverConfig, SolverError, angelesco_solve, classify_solution,
                              mu1_given_mu2, mu2_from_mu1, project_simplex, solve, solve_c,
                              variational_report)

two_bands = RealMeasure.from_density(lambda x: np.full_like(x, 0.5), [(-2.0, -1.0), (1.0, 2.0)])
unit_pair = RealMeasure.atoms([-1.0, 1.0], [0.5, 0.5])


def sheets(sol, V, a, z):
    """xi-functions on Re z > 0 from the Cauchy transforms of a solution."""
    F1, F2 = cauchy_transform(sol.mu1, z), cauchy_transform(sol.mu2, z)
    return V.derivative(z) - F1, a + F1 - F2, -a + F2


# mu2 half-step ------------------------------------------------------------------

def test_saturation_threshold():
    # int dmu1/|s| = log 2, so the constraint switches on below a = log(2)/2
    _, c = mu2_from_mu1(two_bands, 0.4)
    assert c == 0.0
    _, c = mu2_from_mu1(two_bands, 0.3)
    assert c > 0
    _, c = mu2_from_mu1(two_bands, np.log(2) / 2 + 1e-9)
    assert c == 0.0


def test_unsaturated_mass_and_center_density():
    mu2, c = mu2_from_mu1(unit_pair, 1.0)
    assert c == 0.0
    assert abs(mu2.total_mass() - 0.5) < 1e-6
    assert mu2.density_at(0.0) == pytest.approx(1 / (2 * np.pi), rel=1e-14)


def test_atom_at_origin_always_saturates():
    mu1 = RealMeasure.atoms([-1.0, 0.0, 1.0], [0.25, 0.5, 0.25])
    _, c = mu2_from_mu1(mu1, 50.0)
    assert c > 0


def test_solve_c_closed_form():
    assert solve_c(unit_pair, 0.25) == pytest.approx(np.sqrt(3), abs=1e-10)
    with pytest.raises(MeasureError):
        solve_c(unit_pair, 0.6)


@given(st.lists(st.floats(0.05, 3.0), min_size=1, max_size=5), st.floats(0.01, 0.45),
       st.floats(1.01, 3.0))
def test_solve_c_monotone_and_bounded(points, a, ratio):
    pts = np.array(points)
    mu1 = RealMeasure.atoms(np.concatenate([-pts, pts]), np.full(2 * len(pts), 0.5 / len(pts)))
    lo, hi = a, a * ratio
    if not np.mean(1 / pts) > 2 * hi:
        return
    c_lo, c_hi = solve_c(mu1, lo), solve_c(mu1, hi)
    assert c_lo >= c_hi
    assert c_lo < np.pi / (4 * lo)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 2.0), st.floats(0.05, 1.0), st.floats(0.02, 2.0))
def test_saturated_segment_continuity(r, width, a):
    mu1 = RealMeasure.from_density(lambda x: np.full_like(x, 0.5 / width),
                                   [(-r - width, -r), (r, r + width)], n=64)
    mu2, c = mu2_from_mu1(mu1, a)
    if c > 0:
        # density continuous at ic and saturated only on [-c, c]
        assert mu2.density_at(c * (1 + 1e-9)) == pytest.approx(a / np.pi, rel=1e-4)
        sat = np.abs(mu2.nodes)[mu2.density >= a / np.pi * (1 - 1e-12)]
        assert np.max(sat) <= c * (1 + 1e-12)
        assert c < np.pi / (4 * a)


# mu1 half-step ------------------------------------------------------------------

def test_semicircle_without_source():
    mu1, _ = mu1_given_mu2(EvenPolynomial.quadratic(), 0.0, None, SolverConfig(n_cells=400), X=2.5)
    assert mu1.density_at(np.array([0.01]))[0] == pytest.approx(1 / np.pi, abs=1e-2)
    assert abs(mu1.total_mass() - 1) < 1e-12
    assert np.max(np.abs(mu1.density - mu1.density[::-1])) < 1e-10


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30), st.floats(0.1, 3))
def test_project_simplex(v, total):
    w = project_simplex(np.array(v), total)
    assert np.all(w >= 0) and abs(np.sum(w) - total) < 1e-10
    assert np.allclose(project_simplex(w, total), w, atol=1e-12)


def test_classify_solution():
    assert classify_solution(0.0, 2) == "I"
    assert classify_solution(0.3, 2) == "II"
    assert classify_solution(0.3, 1) == "III"
    assert classify_solution(0.0, 1) == "singular"


# full solves --------------------------------------------------------------------

@pytest.mark.parametrize("point", [(0.0, 2.0), (3.0, 0.2), (0.0, 0.5)])
def test_solution_invariants(solutions, point):
    sol = solutions[point]
    a = point[1]
    assert abs(sol.mu1.total_mass() - 1) < 1e-10
    assert abs(sol.mu2.total_mass() - 0.5) < 1e-6
    assert np.max(sol.mu2.density) <= a / np.pi + 1e-12
    assert np.max(np.abs(sol.mu1.density - sol.mu1.density[::-1])) < 1e-10
    assert np.max(np.abs(sol.mu2.density - sol.mu2.density[::-1])) < 1e-10
    assert np.all(np.diff(sol.energies) <= 1e-12 * max(1, abs(sol.energy)))
    assert 1 <= sol.n_intervals <= 2
    if sol.c > 0:
        sat = np.abs(sol.mu2.nodes[sol.mu2.density >= a / np.pi * (1 - 1e-12)])
        assert np.max(sat) <= sol.c * (1 + 1e-12)
        assert sol.c < np.pi / (4 * a)
    # saturation happens exactly when int dmu1/|s| > 2a
    from extsource.solver import inverse_moment
    assert (sol.c > 0) == (inverse_moment(sol.mu1, 0.0) > 2 * a)


@pytest.mark.parametrize("point", [(3.0, 0.2), (0.0, 0.5)])
def test_f2_from_mu1_and_c(solutions, point):
    # closed form of F2 in terms of mu1 and c, valid when the constraint is active
    sol = solutions[point]
    t, a = point
    rng = np.random.default_rng(7)
    z = (rng.uniform(0.2, 3, 20) + 1j * rng.uniform(-3, 3, 20)) * rng.choice([-1, 1], 20)
    s, w = composite_gauss_legendre(sol.mu1.edges, 8)
    dens = sol.mu1.density_at(s) * w
    c = sol.c
    # branch with its cut on the axis outside [-ic, ic]: behaves like |Re z|/Re z * z
    root = np.sqrt(z * z + c * c)
    inner = np.sum(dens / (2 * (z[:, None] - s) * np.sqrt(s * s + c * c)), axis=1)
    rhs = cauchy_transform(sol.mu1, z) / 2 - root * inner + a * np.sign(z.real)
    assert np.max(np.abs(cauchy_transform(sol.mu2, z) - rhs)) < 1e-4


@pytest.mark.parametrize("point", [(0.0, 2.0), (0.0, 0.5)])
def test_curve_parameters_from_solution(solutions, point):
    from extsource.quartic import classify
    sol = solutions[point]
    t, a = point
    V = EvenPolynomial.quartic(t)
    z = np.array([3 + 1j, 2 + 2j, 0.5 + 1.5j])
    x1, x2, x3 = sheets(sol, V, a, z)
    alpha = x1 * x2 + x1 * x3 + x2 * x3 - z ** 2
    beta = (-x1 * x2 * x3 - a * a * z ** 3) / z
    ref = classify(t, a)
    assert np.max(np.abs(alpha - ref.alpha)) < 1e-4
    assert np.max(np.abs(beta - ref.beta)) < 1e-4


def test_genus_one_solution_has_vanishing_parameters():
    t, a = 3.0, 0.2
    V = EvenPolynomial.quartic(t)
    sol = solve(V, a, SolverConfig(n_cells=1600, tol=1e-8))
    assert sol.case == "II"
    z = np.array([3 + 1j, 2 + 2j, 0.5 + 1.5j, 4 + 0.1j, 1 + 0.5j])
    x1, x2, x3 = sheets(sol, V, a, z)
    alpha = float(np.mean((x1 * x2 + x1 * x3 + x2 * x3 - z ** 2).real))
    beta = float(np.mean(((-x1 * x2 * x3 - a * a * z ** 3) / z).real))
    D = discriminant(mclaughlin_curve(t, a, alpha, beta))
    w = np.random.default_rng(0).normal(size=20) + 1j * np.random.default_rng(1).normal(size=20)
    lhs = P.polyval(w, D)
    rhs = w ** 6 * P.polyval(w, d6(t, a))
    assert np.max(np.abs(lhs - rhs) / np.maximum(1, np.abs(lhs))) < 1e-6


def test_quadratic_phases():
    V = EvenPolynomial.quadratic()
    cfg = SolverConfig(n_cells=400)
    big = solve(V, 2.0, cfg)
    assert big.case == "I" and big.n_intervals == 2
    small = solve(V, 0.5, cfg)
    assert small.case == "III" and small.n_intervals == 1


def test_perturbed_density_is_detected(solutions):
    sol = solutions[(3.0, 0.2)]
    V = EvenPolynomial.quartic(3.0)
    base = sol.residuals.eq_residual_mu1
    x = sol.mu1.nodes
    bump = np.exp(-((np.abs(x) - 1.6) / 0.05) ** 2)
    dens = sol.mu1.density * (1 + 0.01 * bump)
    dens /= np.sum(dens * sol.mu1.weights)
    mu1 = RealMeasure.histogram(sol.mu1.edges, dens, sol.mu1.intervals)
    bad = variational_report(dataclasses.replace(sol, mu1=mu1), V, 0.2)
    assert bad.eq_residual_mu1 >= 10 * base


def test_strict_inequality_inside_saturated_segment(solutions):
    r = solutions[(3.0, 0.2)].residuals
    assert r.interior_margin_mu2 > 0 and r.ineq_margin_mu2 > -1e-6


# Angelesco specialization -----------------------------------------------------------

def test_angelesco_energy_identity(solutions):
    ang = quartic_angelesco(0.0, 2.0)
    assert abs(ang.angelesco_energy - ang.energy) < 1e-6
    assert abs(ang.energy - solutions[(0.0, 2.0)].energy) < 1e-6
    assert ang.case == "I"


def test_angelesco_refuses_saturated_case():
    with pytest.raises(SolverError, match="Case I"):
        angelesco_solve(EvenPolynomial.quartic(0.0), 0.5, SolverConfig(n_cells=400))


def test_invalid_inputs():
    with pytest.raises(ValueError):
        solve(EvenPolynomial.quadratic(), 0.0)
    with pytest.raises(ValueError):
        SolverConfig(n_cells=401)
