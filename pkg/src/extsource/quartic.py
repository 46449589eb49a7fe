"""Phase structure of the quartic model V(x) = x^4/4 - t x^2/2.

Boundary curves are expressed as values of a^2 as functions of t:
A1, A2 close the genus-one region from above and below, A3 separates
the two genus-zero phases for t below the corner.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .curve import (BranchPointSet, ClassificationError, CurveError, branch_points,
                    discriminant, mclaughlin_curve)

SQRT3 = np.sqrt(3.0)
CORNER_T = SQRT3
CORNER_A2 = SQRT3 / 9.0
CORNER_A = 27.0 ** -0.25

DEFAULT_BAND = 1e-6


class PhaseError(ValueError):
    pass


def d6(t, a):
    """Ascending coefficients (z^0, z^2, z^4, z^6 interleaved with zeros) of D6."""
    if not a > 0:
        raise PhaseError("a must be positive")
    a2 = a * a
    c0 = -27 * a2 * a2 + (18 * t - 4 * t ** 3) * a2 - 4 + t * t
    c2 = (12 * t * t - 18) * a2 - 2 * t
    c4 = 1 - 12 * t * a2
    c6 = 4 * a2
    return np.array([c0, 0.0, c2, 0.0, c4, 0.0, c6])


def d6_constant(t, a2):
    """Constant term of D6 as a function of (t, a^2); zero on the A1/A2 curves."""
    return -27 * a2 * a2 + (18 * t - 4 * t ** 3) * a2 - 4 + t * t


def painleve_boundary(t):
    """(A1, A2) at t; A2 is None for t > 2."""
    if t < SQRT3 * (1 - 1e-15):
        raise PhaseError("painleve_boundary needs t >= sqrt(3)")
    r = max(t * t - 3.0, 0.0) ** 1.5
    a1 = t / 3.0 - 2.0 / 27.0 * (t ** 3 - r)
    a2 = t / 3.0 - 2.0 / 27.0 * (t ** 3 + r) if t <= 2.0 else None
    return a1, a2


def pearcey_boundary(t):
    return -2.0 * t / 3.0 + (t ** 3 + (t * t + 24.0) ** 1.5) / 108.0


def resultant_curve(t, a):
    """54 a^4 + (72 t - t^3) a^2 - (t^4 - 16 t^2 + 64); zero on A3 (and its negative twin)."""
    a2 = a * a
    return 54 * a2 * a2 + (72 * t - t ** 3) * a2 - (t ** 4 - 16 * t * t + 64)


def d6_y_roots(t, a):
    """Roots of D6 as a cubic in y = z^2."""
    c = d6(t, a)[0::2]
    return np.roots(c[::-1])


def in_genus_one_region(t, a, tol=1e-12):
    """Strict membership in the open genus-one region.

    Uses the sign pattern of the cubic-in-y reduction of D6: two positive
    roots and one negative root, all real and simple.
    """
    y = d6_y_roots(t, a)
    scale = max(1.0, float(np.max(np.abs(y))))
    if np.any(np.abs(y.imag) > tol * scale):
        return False
    y = np.sort(y.real)
    if np.any(np.abs(y) <= tol * scale) or np.any(np.diff(y) <= tol * scale):
        return False
    return bool(np.sum(y > 0) == 2 and np.sum(y < 0) == 1)


# ---------------------------------------------------------------------------
# Genus-zero parametrization
# ---------------------------------------------------------------------------

def genus_zero_parameters(t, a, imag_tol=1e-9):
    """(c, u, alpha, beta) from the largest positive root c of the sextic."""
    if not a > 0:
        raise PhaseError("a must be positive")
    coeffs = [2.0, 0.0, -2.0 * t, -a, 3.0, -t * a, -a * a]
    roots = np.roots(coeffs)
    scale = max(1.0, float(np.max(np.abs(roots))))
    real = roots[np.abs(roots.imag) < imag_tol * scale].real
    pos = real[real > 0]
    if pos.size == 0:
        raise PhaseError("no positive root for the genus-zero parametrization")
    c = float(np.max(pos))
    c4 = c ** 4
    u = 2 * c4 + a * c
    w = (c4 + 2 * c4 * u - u * u) ** 2
    alpha = (1 - u) * w / (c * c * u ** 3)
    beta = -(3 * c4 - u) * w / (c4 * u * u)
    return c, u, alpha, beta


# ---------------------------------------------------------------------------
# Boundary distances
# ---------------------------------------------------------------------------

def _a_of(A):
    return np.sqrt(np.maximum(A, 0.0))


def _curve_distance(t, a, fn, lo, hi):
    """Euclidean distance in the (t, a) plane from (t, a) to {(s, sqrt(fn(s))): lo <= s <= hi}."""
    if hi <= lo:
        return float(np.hypot(t - lo, a - _a_of(fn(lo))))

    def d2(s):
        return (s - t) ** 2 + (_a_of(fn(s)) - a) ** 2

    grid = np.linspace(lo, hi, 401)
    vals = np.array([d2(s) for s in grid])
    k = int(np.argmin(vals))
    best = vals[k]
    left, right = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    if right > left:
        res = minimize_scalar(d2, bounds=(left, right), method="bounded",
                              options={"xatol": 1e-14})
        best = min(best, float(res.fun))
    return float(np.sqrt(best))


def boundary_distances(t, a):
    """Distances to the A1, A2 and A3 curves (the latter taken for t <= sqrt(3))."""
    reach = abs(t - SQRT3) + abs(a) + 1.0
    d1 = _curve_distance(t, a, lambda s: painleve_boundary(s)[0], SQRT3, max(SQRT3, t) + reach)
    d2 = _curve_distance(t, a, lambda s: painleve_boundary(min(s, 2.0))[1], SQRT3, 2.0)
    d3 = _curve_distance(t, a, pearcey_boundary, min(SQRT3, t) - reach, SQRT3)
    return {"A1": d1, "A2": d2, "A3": d3}


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

@dataclass
class PhasePoint:
    t: float
    a: float
    case: Optional[str]
    genus: Optional[int]
    alpha: float
    beta: float
    branch: Optional[BranchPointSet]
    boundary_flags: dict = field(default_factory=dict)
    critical: bool = False
    message: str = ""

    @property
    def region(self):
        return "critical" if self.critical else self.case


def _expected_pattern(pts: BranchPointSet, deg):
    """Simple zeros plus multiplicities must account for the whole discriminant."""
    simple = 2 * len(pts.real_pairs) + (2 if pts.imaginary_pair is not None else 0)
    multiple = sum(m for _, m in pts.double_roots)
    return simple + multiple == deg


def classify(t, a, band=DEFAULT_BAND, root_tol=1e-6):
    """Classify (t, a) into Case I, II or III.

    Points within ``band`` of a transition curve, or whose discriminant
    zeros cannot be grouped into a regular pattern, are flagged critical.
    """
    if not a > 0:
        raise PhaseError("a must be positive")
    dist = boundary_distances(t, a)
    near = {k: bool(v < band) for k, v in dist.items()}
    # the genus-one wedge between A1 and A2 narrows like r^(3/2) at the
    # corner, so below r = band^(2/3) it is thinner than the band itself
    corner = float(np.hypot(t - CORNER_T, a - CORNER_A))
    near["corner"] = bool(corner < band ** (2.0 / 3.0))
    dist = dict(dist, corner=corner)
    flags = {"distance": dist, "near": near}
    critical = any(near.values())
    msg = "within the boundary band" if critical else ""

    if in_genus_one_region(t, a):
        curve = mclaughlin_curve(t, a, 0.0, 0.0)
        try:
            pts = branch_points(curve, root_tol)
        except ClassificationError as exc:
            return PhasePoint(t, a, "II", 1, 0.0, 0.0, None, flags, True, str(exc))
        if len(pts.real_pairs) != 2 or pts.imaginary_pair is None:
            critical, msg = True, "genus-one region but irregular branch pattern"
        return PhasePoint(t, a, "II", 1, 0.0, 0.0, pts, flags, critical, msg)

    try:
        _, _, alpha, beta = genus_zero_parameters(t, a)
        curve = mclaughlin_curve(t, a, alpha, beta)
        pts = branch_points(curve, root_tol)
    except (PhaseError, CurveError) as exc:
        return PhasePoint(t, a, None, None, np.nan, np.nan, None, flags, True, str(exc))

    deg = len(discriminant(curve)) - 1
    n, has_c = len(pts.real_pairs), pts.imaginary_pair is not None
    if n == 2 and not has_c:
        case = "I"
    elif n == 1 and has_c:
        case = "III"
    else:
        return PhasePoint(t, a, None, None, alpha, beta, pts, flags, True,
                          f"irregular branch pattern: {n} real pairs, imaginary={has_c}")
    if not _expected_pattern(pts, deg) or any(m > 2 for _, m in pts.double_roots):
        critical, msg = True, "discriminant zeros collide"
    return PhasePoint(t, a, case, 0, alpha, beta, pts, flags, critical, msg)


# ---------------------------------------------------------------------------
# Scans and polylines
# ---------------------------------------------------------------------------

def boundary_polylines(t_range=(0.0, 4.0), n=200):
    """Sampled transition curves as {name: (t, a)} arrays (a = sqrt(A))."""
    t0, t1 = t_range
    out = {}
    ta = np.linspace(max(t0, SQRT3), t1, n) if t1 >= SQRT3 else np.empty(0)
    out["A1"] = (ta, np.array([np.sqrt(painleve_boundary(s)[0]) for s in ta]))
    if t1 >= SQRT3 and t0 <= 2.0:
        tb = np.linspace(max(t0, SQRT3), min(t1, 2.0), n)
        out["A2"] = (tb, np.array([np.sqrt(max(painleve_boundary(s)[1], 0.0)) for s in tb]))
    else:
        out["A2"] = (np.empty(0), np.empty(0))
    tc = np.linspace(t0, min(t1, SQRT3), n) if t0 <= SQRT3 else np.empty(0)
    out["A3"] = (tc, np.sqrt(pearcey_boundary(tc)))
    return out


def _classify_row(args):
    t, a, band, root_tol = args
    try:
        return classify(t, a, band, root_tol)
    except Exception as exc:  # per-point isolation
        return PhasePoint(t, a, None, None, np.nan, np.nan, None, {}, True, f"error: {exc}")


def scan(t_range, a_range, resolution, band=DEFAULT_BAND, root_tol=1e-6, jobs=1):
    """Row-major (t outer, a inner) classification grid plus boundary polylines."""
    if np.ndim(resolution) == 0:
        resolution = (resolution, resolution)
    nt, na = int(resolution[0]), int(resolution[1])
    if nt <= 0 or na <= 0:
        raise PhaseError("resolution must be positive")
    ts = np.linspace(t_range[0], t_range[1], nt)
    as_ = np.linspace(a_range[0], a_range[1], na)
    tasks = [(float(t), float(a), band, root_tol) for t in ts for a in as_]
    if jobs and jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_classify_row, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        rows = [_classify_row(x) for x in tasks]
    # proximity at grid resolution: a curve passes through the cell around the point
    dt = (ts[1] - ts[0]) if nt > 1 else 0.0
    da = (as_[1] - as_[0]) if na > 1 else 0.0
    cell = 0.5 * float(np.hypot(dt, da))
    for r in rows:
        dist = r.boundary_flags.get("distance")
        if dist:
            r.boundary_flags["cell_near"] = {k: bool(v <= cell) for k, v in dist.items()
                                             if k != "corner"}
    return rows, boundary_polylines(t_range)
