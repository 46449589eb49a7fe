import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import polynomial as P

from extsource.curve import (ClassificationError, branch_points, cubic_roots, curve_density,
                             density_from_curve, discriminant, is_even_polynomial,
                             locate_collision, mclaughlin_curve, pastur_curve, solve_sheets)
from extsource.quartic import classify, genus_zero_parameters


def test_pastur_coefficients():
    c = pastur_curve(1.0)
    assert np.allclose(c.p2, [0, -1]) and np.allclose(c.p1, [0]) and np.allclose(c.p0, [0, 1])
    c = pastur_curve(2.0)
    assert np.allclose(c.p1, [-3]) and np.allclose(c.p0, [0, 4])


def test_pastur_triple_root_at_origin():
    assert np.max(np.abs(cubic_roots(pastur_curve(1.0), 0.0))) < 1e-12


def test_mclaughlin_coefficients():
    c = mclaughlin_curve(0.0, 1.0, 0.0, 0.0)
    assert np.allclose(c.p2, [0, 0, 0, -1])
    assert np.allclose(c.p1, [0, 0, 1])
    assert np.allclose(c.p0, [0, 0, 0, 1])
    # p2 = -V'
    c = mclaughlin_curve(1.3, 0.4, 0.1, -0.2)
    assert np.allclose(-c.p2, [0, -1.3, 0, 1])


def test_sheet_labels_at_large_z():
    xi = solve_sheets(pastur_curve(2.0), 100.0)
    assert abs(xi[0] - (100 - 0.01)) < 1e-3
    assert abs(xi[1] - 2.005) < 1e-3
    assert abs(xi[2] + 1.995) < 1e-3


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 2), st.floats(0.05, 3), st.floats(0.05, 3),
       st.sampled_from([1, -1]))
def test_vieta(t, a, zr, zi, sign):
    # cuts lie on the two axes, so stay off both
    p = classify(t, a)
    if p.case is None:
        return
    curve = mclaughlin_curve(t, a, p.alpha, p.beta)
    z = complex(sign * zr, zi)
    xi = solve_sheets(curve, z)
    p2, p1, p0 = curve.coefficients(z)
    scale = max(1.0, abs(p2), abs(p1) ** 0.5, abs(p0) ** (1 / 3)) ** 3
    assert abs(np.sum(xi) + p2) <= 1e-10 * max(1.0, abs(p2))
    assert abs(np.prod(xi) + p0) <= 1e-10 * scale


def test_sheets_continuous_along_ray():
    p = classify(3.0, 0.2)
    curve = mclaughlin_curve(3.0, 0.2, 0.0, 0.0)
    # ray from far away towards a point just above the support
    z = 1.6 + 1e-3j + np.geomspace(30.0, 1e-3, 400) * np.exp(0.3j)
    xi = solve_sheets(curve, z)
    step = np.abs(np.diff(xi, axis=0))
    sep = np.abs(xi[:, [0, 0, 1]] - xi[:, [1, 2, 2]])
    near = np.array([np.minimum(s[[0, 0, 1]], s[[1, 2, 2]]) for s in sep])
    assert np.all(step < 0.5 * near[:-1])
    assert p.case == "II"


# discriminant ----------------------------------------------------------------

def test_discriminant_constant_and_square_terms():
    assert discriminant(mclaughlin_curve(0.7, 1.0, 1.0, 0.0))[0] == pytest.approx(-4.0)
    assert discriminant(mclaughlin_curve(0.0, 1.0, 0.0, 1.0))[2] == pytest.approx(-27.0)


@given(st.floats(-3, 3), st.floats(0.1, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_discriminant_low_coefficients(t, a, alpha, beta):
    D = discriminant(mclaughlin_curve(t, a, alpha, beta))
    D = np.pad(D, (0, 13 - len(D)))
    assert len(D) == 13
    assert D[0] == pytest.approx(-4 * alpha ** 3, abs=1e-9)
    ref = alpha ** 2 * t ** 2 + 18 * alpha * beta * t - 12 * alpha ** 2 - 27 * beta ** 2
    assert D[2] == pytest.approx(ref, abs=1e-9)
    assert is_even_polynomial(D)


# branch points ----------------------------------------------------------------

def test_genus_one_branch_points():
    pts = branch_points(mclaughlin_curve(3.0, 0.2, 0.0, 0.0))
    assert len(pts.real_pairs) == 2 and pts.imaginary_pair is not None
    assert pts.genus == 1 and pts.case == "II"


def test_pastur_branch_points():
    big = branch_points(pastur_curve(2.0))
    assert len(big.real_pairs) == 2 and big.imaginary_pair is None
    assert big.genus == 0 and big.case == "I"
    small = branch_points(pastur_curve(0.5))
    assert len(small.real_pairs) == 1 and small.imaginary_pair is not None
    assert small.genus == 0 and small.case == "III"
    crit = branch_points(pastur_curve(1.0))
    assert any(z == 0 and m >= 2 for z, m in crit.double_roots)


@pytest.mark.parametrize("t,a", [(0.0, 2.0), (0.0, 0.5), (3.0, 0.2), (-1.0, 1.0), (2.5, 0.6)])
def test_genus_formula(t, a):
    pts = classify(t, a).branch
    n = len(pts.intervals)
    assert pts.genus == (n - 2 if pts.case == "I" else n - 1)


def test_collision_bisection():
    assert abs(locate_collision(pastur_curve, 0.5, 2.0) - 1.0) < 1e-9


def test_ambiguous_roots_are_reported():
    # a generic (non-even) curve whose simple zeros have no symmetric partner
    from extsource.curve import SpectralCurve
    curve = SpectralCurve(np.array([0.3, -1.0]), np.array([1.0, 0.2]), np.array([0.1, 1.0]))
    with pytest.raises(ClassificationError):
        branch_points(curve)


# Stieltjes inversion ----------------------------------------------------------

def test_genus_zero_density_mass():
    _, _, alpha, beta = genus_zero_parameters(0.0, 2.0)
    mu = density_from_curve(mclaughlin_curve(0.0, 2.0, alpha, beta))
    assert abs(mu.total_mass() - 1.0) < 1e-4
    assert len(mu.intervals) == 2


@pytest.mark.parametrize("t,a", [(0.0, 2.0), (3.0, 0.2), (0.0, 0.5)])
def test_square_root_edges(t, a):
    p = classify(t, a)
    curve = mclaughlin_curve(t, a, p.alpha, p.beta)
    for lo, hi in p.branch.intervals:
        if hi <= 0:
            continue
        d = np.array([1e-4, 1e-5]) * (hi - lo)
        rho = curve_density(curve, hi - d)
        slope = np.log(rho[0] / rho[1]) / np.log(d[0] / d[1])
        assert abs(slope - 0.5) < 0.05


def test_pastur_density_is_semicircle_like():
    # quadratic model at large a: two intervals, total mass one
    mu = density_from_curve(pastur_curve(2.0))
    assert abs(mu.total_mass() - 1.0) < 1e-4


@pytest.mark.parametrize("t,a", [(0.0, 2.0), (3.0, 0.2), (0.0, 0.5)])
def test_density_symmetry(t, a):
    p = classify(t, a)
    curve = mclaughlin_curve(t, a, p.alpha, p.beta)
    x = np.concatenate([np.linspace(lo, hi, 41)[1:-1] for lo, hi in p.branch.intervals if hi > 0])
    assert np.max(np.abs(curve_density(curve, x) - curve_density(curve, -x))) < 1e-10
