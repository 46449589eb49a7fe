import functools

import numpy as np
import pytest

from extsource.curve import curve_density, mclaughlin_curve
from extsource.measures import EvenPolynomial
from extsource.quartic import classify
from extsource.solver import SolverConfig, angelesco_solve, solve

# reference resolution for the solver checks
REFERENCE = SolverConfig(n_cells=1200, tol=1e-8)
POINTS = [(0.0, 2.0), (3.0, 0.2), (0.0, 0.5)]


@functools.lru_cache(maxsize=None)
def quartic_solution(t, a):
    return solve(EvenPolynomial.quartic(t), a, REFERENCE)


@functools.lru_cache(maxsize=None)
def quartic_angelesco(t, a):
    return angelesco_solve(EvenPolynomial.quartic(t), a, REFERENCE)


@functools.lru_cache(maxsize=None)
def quartic_point(t, a):
    return classify(t, a)


def curve_reference(t, a, x):
    p = quartic_point(t, a)
    return curve_density(mclaughlin_curve(t, a, p.alpha, p.beta), x)


def interior_nodes(x, intervals, frac=0.01):
    keep = np.zeros(x.shape, bool)
    for lo, hi in intervals:
        pad = frac * (hi - lo)
        keep |= (x > lo + pad) & (x < hi - pad)
    return keep


@pytest.fixture(scope="session")
def solutions():
    return {p: quartic_solution(*p) for p in POINTS}
