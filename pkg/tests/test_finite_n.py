import numpy as np
import pytest
from scipy import stats

from extsource.curve import density_from_curve, pastur_curve
from extsource.finite_n import (EnsembleSpec, FiniteNError, avg_char_poly_check,
                                density_comparison, ks_distance, measure_cdf, mop_degree_two,
                                mop_from_moments, sample_eigenvalues, weight_moments)
from extsource.measures import EvenPolynomial

quadratic = EvenPolynomial.quadratic()
quartic = EvenPolynomial.quartic(0.0)


def semicircle_cdf(x):
    x = np.clip(x, -2, 2)
    return 0.5 + x * np.sqrt(4 - x * x) / (4 * np.pi) + np.arcsin(x / 2) / np.pi


def test_spec_requires_even_n():
    with pytest.raises(FiniteNError):
        EnsembleSpec(quadratic, 1.0, 3)
    assert EnsembleSpec(quadratic, 1.5, 4).source.tolist() == [1.5, 1.5, -1.5, -1.5]


# sampler --------------------------------------------------------------------------

def test_two_by_two_target_law():
    # n = 2, V = x^2/2: M11 ~ N(a, 1/2), M22 ~ N(-a, 1/2), Re/Im M12 ~ N(0, 1/4),
    # so Tr M ~ N(0, 1) and (l1 - l2)^2 is noncentral chi^2(3, 4a^2)
    a = 0.8
    s = sample_eigenvalues(EnsembleSpec(quadratic, a, 2), chains=32, steps=3000, seed=5, thin=5)
    lam = s.eigenvalues.reshape(-1, 2)
    tr = lam.sum(axis=1)
    gap2 = (lam[:, 1] - lam[:, 0]) ** 2
    assert stats.kstest(tr, stats.norm(0, 1).cdf).statistic < 0.02
    assert stats.kstest(gap2, stats.ncx2(3, 4 * a * a).cdf).statistic < 0.02
    assert not s.warnings


def test_reproducible():
    spec = EnsembleSpec(quartic, 1.0, 4)
    s1 = sample_eigenvalues(spec, chains=4, steps=60, seed=42)
    s2 = sample_eigenvalues(spec, chains=4, steps=60, seed=42)
    s3 = sample_eigenvalues(spec, chains=4, steps=60, seed=43)
    assert np.array_equal(s1.eigenvalues, s2.eigenvalues)
    assert not np.array_equal(s1.eigenvalues, s3.eigenvalues)


def test_zero_source_semicircle():
    s = sample_eigenvalues(EnsembleSpec(quadratic, 0.0, 16), chains=16, steps=200, seed=3)
    assert ks_distance(s.pooled, semicircle_cdf) < 0.08
    # symmetric spectrum: mean zero within three standard errors (per-chain means)
    means = s.eigenvalues.mean(axis=(1, 2))
    assert abs(means.mean()) < 3 * means.std(ddof=1) / np.sqrt(len(means))


def test_two_clusters_in_case_one(solutions):
    s = sample_eigenvalues(EnsembleSpec(quartic, 2.0, 16), chains=16, steps=150, seed=8)
    inner = solutions[(0.0, 2.0)].support[-1][0]
    x = s.pooled
    assert np.mean(np.abs(x) < 0.6 * inner) < 0.01
    assert 0.4 < np.mean(x > 0) < 0.6


def test_acceptance_warning():
    s = sample_eigenvalues(EnsembleSpec(quadratic, 1.0, 2), chains=2, steps=400, seed=1, target=0.95)
    assert s.warnings and "step size" in s.warnings[0]


def test_steps_must_exceed_burn_in():
    with pytest.raises(FiniteNError):
        sample_eigenvalues(EnsembleSpec(quadratic, 1.0, 2), steps=10, burn_in=10)


# density comparison ---------------------------------------------------------------

def test_ks_of_exact_samples(solutions):
    mu1 = solutions[(0.0, 2.0)].mu1
    u = np.random.default_rng(0).uniform(size=20000)
    cum = np.concatenate([[0], np.cumsum(mu1.masses)])
    x = np.interp(u, cum, mu1.edges)
    ks = density_comparison(x, mu1)["ks"]
    assert ks < 3 / np.sqrt(u.size)


def test_quadratic_case_one_ks():
    mu1 = density_from_curve(pastur_curve(2.0))
    s = sample_eigenvalues(EnsembleSpec(quadratic, 2.0, 32), chains=8, steps=60, seed=4)
    rep = density_comparison(s, mu1)
    assert rep["ks"] < 0.12 and rep["n"] == 32 and rep["samples"] == s.pooled.size
    assert measure_cdf(mu1, np.array([-10.0, 10.0])) == pytest.approx([0, 1], abs=1e-4)


# multiple orthogonal polynomials ------------------------------------------------------

def test_degree_two_reduction():
    for V, a in ((quadratic, 1.0), (quartic, 2.0), (quartic, 0.5)):
        spec = EnsembleSpec(V, a, 2)
        assert np.allclose(mop_from_moments(spec).coeffs, mop_degree_two(spec), rtol=0, atol=1e-12)


@pytest.mark.parametrize("n", [4, 8, 12])
def test_mop_even_with_paired_real_zeros(n):
    mop = mop_from_moments(EnsembleSpec(quartic, 2.0, n))
    assert mop.coeffs[-1] == 1.0
    assert np.max(np.abs(mop.coeffs[1::2])) < 1e-8 * np.max(np.abs(mop.coeffs))
    z = np.sort(mop.zeros.real)
    assert np.max(np.abs(mop.zeros.imag)) < 1e-8
    assert np.allclose(z, -z[::-1], atol=1e-8)


def test_mop_condition_guard():
    with pytest.raises(FiniteNError, match="smaller n"):
        mop_from_moments(EnsembleSpec(quartic, 2.0, 16))


def test_moment_depth_convergence():
    spec = EnsembleSpec(quartic, 2.0, 12)
    m1 = weight_moments(spec, 18, depth=64)
    m2 = weight_moments(spec, 18, depth=128)
    assert np.max(np.abs(m1 - m2) / np.abs(m2)) < 1e-10


# average characteristic polynomial ---------------------------------------------------

def test_char_poly_quadratic_n4():
    spec = EnsembleSpec(quadratic, 1.0, 4)
    s = sample_eigenvalues(spec, chains=32, steps=600, seed=12)
    pts = avg_char_poly_check(spec, s, [0.0, 3.0])
    assert all(p.verdict == "pass" for p in pts)
    assert isinstance(pts[0].monte_carlo, float) and isinstance(pts[0].exact, float)


def test_char_poly_n2():
    spec = EnsembleSpec(quartic, 1.0, 2)
    s = sample_eigenvalues(spec, chains=32, steps=1000, seed=13)
    pts = avg_char_poly_check(spec, s, [-2.0, -0.5, 0.0, 0.8, 2.5])
    assert all(p.discrepancy <= 3 * p.std_error for p in pts)


def test_char_poly_verdicts():
    spec = EnsembleSpec(quadratic, 1.0, 2)
    s = sample_eigenvalues(spec, chains=4, steps=20, seed=1)
    mop = mop_from_moments(spec)
    # P_2 has a real zero; a wrong exact value far outside the error bars fails
    zero = float(mop.zeros.real.max())
    assert avg_char_poly_check(spec, s, [zero], mop)[0].verdict == "inconclusive"

    class Shifted:
        def __call__(self, z):
            return mop(z) + 100.0
    assert avg_char_poly_check(spec, s, [3.0], Shifted())[0].verdict == "fail"
