"""Cubic spectral curves xi^3 + p2(z) xi^2 + p1(z) xi + p0(z) = 0.

Polynomials in z are stored as ascending coefficient arrays (the
``numpy.polynomial.polynomial`` convention).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as P

from .measures import EvenPolynomial, RealMeasure, angle_nodes


class CurveError(ValueError):
    pass


class ClassificationError(CurveError):
    """Branch points could not be classified unambiguously (near-critical input)."""


@dataclass(frozen=True)
class SpectralCurve:
    p2: np.ndarray
    p1: np.ndarray
    p0: np.ndarray
    kind: str = "generic"
    params: dict = field(default_factory=dict)

    def coefficients(self, z):
        """(p2(z), p1(z), p0(z)) evaluated at z."""
        z = np.asarray(z, dtype=complex)
        return P.polyval(z, self.p2), P.polyval(z, self.p1), P.polyval(z, self.p0)

    def __call__(self, z, xi):
        p2, p1, p0 = self.coefficients(z)
        return xi ** 3 + p2 * xi ** 2 + p1 * xi + p0

    @property
    def a(self):
        return self.params["a"]

    @property
    def potential_derivative(self):
        return -np.asarray(self.p2)


def pastur_curve(a):
    """xi^3 - z xi^2 + (1 - a^2) xi + a^2 z (V = x^2/2)."""
    if not a > 0:
        raise CurveError("a must be positive")
    return SpectralCurve(np.array([0.0, -1.0]), np.array([1.0 - a * a]),
                         np.array([0.0, a * a]), "quadratic", {"a": float(a)})


def mclaughlin_curve(t, a, alpha, beta):
    """xi^3 - (z^3 - t z) xi^2 + (z^2 + alpha) xi + a^2 z^3 + beta z."""
    if not a > 0:
        raise CurveError("a must be positive")
    return SpectralCurve(np.array([0.0, t, 0.0, -1.0]), np.array([alpha, 0.0, 1.0]),
                         np.array([0.0, beta, 0.0, a * a]), "quartic",
                         {"t": float(t), "a": float(a), "alpha": float(alpha), "beta": float(beta)})


def generic_curve(V: EvenPolynomial, a, p1, p0):
    """Curve with p2 = -V' and caller-supplied p1, p0 (no attempt to derive them)."""
    if not a > 0:
        raise CurveError("a must be positive")
    return SpectralCurve(-V.derivative_coeffs(), np.asarray(p1, float), np.asarray(p0, float),
                         "generic", {"a": float(a)})


# ---------------------------------------------------------------------------
# Root solving and sheet tracking
# ---------------------------------------------------------------------------

def cubic_roots(curve, z):
    """All three xi-roots at each z (companion-matrix eigenvalues), shape (..., 3)."""
    z = np.asarray(z, dtype=complex)
    p2, p1, p0 = curve.coefficients(z)
    comp = np.zeros(z.shape + (3, 3), dtype=complex)
    comp[..., 0, 0] = -p2
    comp[..., 0, 1] = -p1
    comp[..., 0, 2] = -p0
    comp[..., 1, 0] = 1.0
    comp[..., 2, 1] = 1.0
    return np.linalg.eigvals(comp)


_PERMS = np.array(list(itertools.permutations(range(3))))


def _match(prev, new):
    """Reorder ``new`` (n, 3) to follow ``prev``.

    Also returns, per point, the largest ratio of a root's displacement to
    its distance from the nearest other root of ``prev``; the labelling is
    unambiguous while this stays below 1/2.
    """
    cand = new[:, _PERMS]                       # (n, 6, 3)
    # summed displacement: a large move of one root cannot mask a swap of the others
    cost = np.sum(np.abs(cand - prev[:, None, :]), axis=2)
    best = np.argmin(cost, axis=1)
    ordered = cand[np.arange(len(new)), best]
    gaps = np.abs(prev[:, :, None] - prev[:, None, :])
    gaps[:, np.arange(3), np.arange(3)] = np.inf
    near = np.min(gaps, axis=2)
    ratio = np.max(np.abs(ordered - prev) / np.where(near > 0, near, 1e-300), axis=1)
    return ordered, ratio


def asymptotic_sheets(curve, z):
    """Leading large-z behaviour of (xi1, xi2, xi3)."""
    z = np.asarray(z, dtype=complex)
    a = curve.a
    vp = P.polyval(z, curve.potential_derivative)
    return np.stack([vp - 1.0 / z, a + 0.5 / z, -a + 0.5 / z], axis=-1)


def _branch_radius(curve):
    try:
        disc = discriminant(curve)
        r = np.roots(disc[::-1][np.argmax(np.abs(disc[::-1]) > 0):])
        return float(np.max(np.abs(r))) if r.size else 1.0
    except np.linalg.LinAlgError:
        return 1.0


def solve_sheets(curve, z, R=None, exclusion=1e-10, max_refine=40):
    """(xi1, xi2, xi3) at z, labelled by continuation from infinity.

    The path is a straight ray ending at z: radial for points away from the
    real axis, tilted off the vertical for points near it, so it never crosses
    a cut on either axis. Steps are halved wherever the matched roots move by more than
    half their separation.
    """
    zarr = np.atleast_1d(np.asarray(z, dtype=complex))
    scale = 1.0 + _branch_radius(curve)
    if R is None:
        R = 10.0 * scale
    # near the real axis: a ray tilted 30 degrees off the vertical, away from
    # the imaginary axis, so it stays inside one open quadrant
    sx = np.where(zarr.real < 0, -1.0, 1.0)
    sy = np.where(zarr.imag < 0, -1.0, 1.0)
    tilted = 0.5 * sx + 1j * sy * np.sqrt(3.0) / 2
    direction = np.where(np.abs(zarr.imag) < 0.1 * np.abs(zarr.real) + 1e-6 * scale,
                         tilted, zarr / np.where(zarr == 0, 1, np.abs(zarr)))
    start = zarr + R * direction

    roots0 = cubic_roots(curve, start)
    labels = asymptotic_sheets(curve, start)
    current, _ = _match(labels, roots0)

    # geometric schedule of distances from the target, refined on demand
    dist = R * np.geomspace(1.0, 1e-14, 200)
    dist = np.append(dist, 0.0)
    s_prev = dist[0]
    for s_next in dist[1:]:
        current = _advance(curve, zarr, direction, current, s_prev, s_next, max_refine)
        s_prev = s_next
    sep = np.min(np.abs(current[:, [0, 0, 1]] - current[:, [1, 2, 2]]), axis=1)
    if np.any(sep < exclusion * scale):
        raise CurveError("z is within the branch-point exclusion radius")
    return current.reshape(np.shape(z) + (3,))


def _advance(curve, z, direction, current, s_from, s_to, depth):
    new = cubic_roots(curve, z + s_to * direction)
    ordered, ratio = _match(current, new)
    bad = ratio > 0.5
    if not np.any(bad):
        return ordered
    if depth == 0:
        raise CurveError("sheet tracking failed: roots too close along the path")
    s_mid = 0.5 * (s_from + s_to)
    idx = np.where(bad)[0]
    mid = _advance(curve, z[idx], direction[idx], current[idx], s_from, s_mid, depth - 1)
    ordered[idx] = _advance(curve, z[idx], direction[idx], mid, s_mid, s_to, depth - 1)
    return ordered


# ---------------------------------------------------------------------------
# Discriminant and branch points
# ---------------------------------------------------------------------------

def discriminant(curve):
    """Discriminant in xi as an ascending polynomial in z."""
    b, c, d = curve.p2, curve.p1, curve.p0
    m = P.polymul
    terms = [m(m(b, b), m(c, c)), -4 * m(m(c, c), c), -4 * m(m(m(b, b), b), d),
             -27 * m(d, d), 18 * m(m(b, c), d)]
    out = np.zeros(max(len(t) for t in terms))
    for t in terms:
        out[:len(t)] += t
    return P.polytrim(out, 0.0) if np.any(out) else np.zeros(1)


@dataclass
class BranchPointSet:
    real_pairs: list            # b > 0, descending: branch points +-b
    imaginary_pair: Optional[float]   # c > 0: branch points +-ic
    genus: int
    double_roots: list          # (root, multiplicity) for the non-simple zeros

    @property
    def n_intervals(self):
        return len(self.real_pairs)

    @property
    def case(self):
        n = self.n_intervals
        if self.imaginary_pair is None:
            return "I" if n % 2 == 0 else "singular"
        return "II" if n % 2 == 0 else "III"

    @property
    def intervals(self):
        """Support of mu1 implied by the real branch points (symmetric)."""
        b = sorted(self.real_pairs)
        ivs = []
        if len(b) % 2 == 1:
            ivs.append((-b[0], b[0]))
            b = b[1:]
        for lo, hi in zip(b[0::2], b[1::2]):
            ivs.append((lo, hi))
            ivs.append((-hi, -lo))
        return sorted(ivs)


def is_even_polynomial(coeffs, tol=1e-12):
    c = np.asarray(coeffs, dtype=float)
    scale = np.max(np.abs(c)) if c.size else 1.0
    return bool(np.all(np.abs(c[1::2]) <= tol * scale))


def discriminant_y_roots(disc):
    """Roots in y = z^2 of an even discriminant (exact zeros at y = 0 kept)."""
    q = np.asarray(disc, dtype=float)[0::2]
    nz = np.nonzero(q)[0]
    low = nz[0] if nz.size else 0
    roots = np.roots(q[low:][::-1]) if len(q) - low > 1 else np.empty(0)
    return np.concatenate([np.zeros(low, dtype=complex), roots.astype(complex)])


def _linkage_groups(roots, rel, squared=False):
    """Single-linkage clusters; i, j are linked when their distance is at most
    rel * max(1, |ri|, |rj|).

    With ``squared`` the roots are values y = z^2 and distances are measured
    in z via |yi - yj| / (|sqrt yi| + |sqrt yj|), which needs no branch choice.
    """
    n = len(roots)
    label = list(range(n))
    if squared:
        mag = np.sqrt(np.abs(roots))

        def dist(i, j):
            den = mag[i] + mag[j]
            return abs(roots[i] - roots[j]) / den if den > 0 else 0.0
    else:
        mag = np.abs(roots)

        def dist(i, j):
            return abs(roots[i] - roots[j])

    def find(i):
        while label[i] != i:
            label[i] = label[label[i]]
            i = label[i]
        return i

    for i, j in itertools.combinations(range(n), 2):
        if dist(i, j) <= rel * max(1.0, mag[i], mag[j]):
            label[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(roots[i])
    return [np.array(g) for g in groups.values()]


def square_split(p, tol=1e-6, squared=False):
    """Split the zeros of a real polynomial into simple and multiple ones.

    Computed roots are grouped by single linkage with radius sqrt(tol)
    relative to the roots involved: a double zero perturbed by coefficient
    noise splits like the square root of that noise, and two branch points
    at parameter distance tol from a collision are about sqrt(tol) apart.
    A group of odd size holds exactly one simple zero (nodes are double);
    a group of even size is read as a multiple zero.
    ``squared`` means p is a polynomial in y = z^2 and grouping is done in z.
    Returns (simple roots, [(root, multiplicity), ...]).
    """
    p = np.asarray(p, dtype=float)
    roots = np.roots(p[::-1]) if len(p) > 1 else np.empty(0, complex)
    if roots.size < 2:
        return roots.astype(complex), []
    simple, mult = [], []
    for g in _linkage_groups(roots, np.sqrt(tol), squared):
        if len(g) == 1:
            simple.append(complex(g[0]))
            continue
        cen = complex(np.mean(g))
        if len(g) % 2 == 1:
            simple.append(cen)
            mult.append((cen, len(g) - 1))
        else:
            mult.append((cen, len(g)))
    return np.array(simple, dtype=complex), mult


def branch_points(curve, tol=1e-6):
    """Classify discriminant zeros into branch points and multiple zeros.

    Even discriminants are factored in y = z^2 so +-pairs stay exact.
    Multiple zeros are found by fitting a square factor (see square_split);
    zeros within ``tol`` (relative) of the origin count as a zero at z = 0.
    """
    disc = discriminant(curve)
    real_pairs, imag, doubles = [], [], []
    if is_even_polynomial(disc):
        q = np.asarray(disc, dtype=float)[0::2]
        nz = np.nonzero(q)[0]
        low = int(nz[0]) if nz.size else 0
        simple, mult = square_split(q[low:], tol, squared=True)
        allr = np.concatenate([simple, [w for w, _ in mult]]) if mult else simple
        scale = max(1.0, float(np.max(np.abs(allr)))) if allr.size else 1.0
        # the origin test is done in z: |z| <= tol * zscale
        origin = (tol * np.sqrt(scale)) ** 2
        zero_mult = 2 * low
        for y in simple:
            if abs(y) <= origin:
                zero_mult += 2
            elif abs(y.imag) > tol * scale:
                raise ClassificationError(f"simple zero y={y} off both axes")
            elif y.real > 0:
                real_pairs.append(float(np.sqrt(y.real)))
            else:
                imag.append(float(np.sqrt(-y.real)))
        for y, m in mult:
            if abs(y) <= origin:
                zero_mult += 2 * m
            else:
                zr = complex(np.sqrt(complex(y)))
                doubles += [(zr, m), (-zr, m)]
        if zero_mult:
            doubles.append((0j, zero_mult))
    else:
        simple, doubles = square_split(disc, tol)
        scale = max(1.0, float(np.max(np.abs(simple)))) if simple.size else 1.0
        used = set()
        for i, z in enumerate(simple):
            if i in used:
                continue
            partner = [j for j, w in enumerate(simple)
                       if j != i and j not in used and abs(w + z) <= tol * scale]
            if not partner:
                raise ClassificationError(f"simple zero {z} has no symmetric partner")
            used.update({i, partner[0]})
            if abs(z.imag) <= tol * scale:
                real_pairs.append(abs(z.real))
            elif abs(z.real) <= tol * scale:
                imag.append(abs(z.imag))
            else:
                raise ClassificationError(f"simple zero {z} is off both axes")
    if len(imag) > 1:
        raise ClassificationError("more than one imaginary pair of branch points")
    real_pairs = sorted(real_pairs, reverse=True)
    c = imag[0] if imag else None
    n = len(real_pairs)
    # an odd real count without imaginary pair only occurs at a collision at 0
    genus = n - 1 if (c is not None or n % 2 == 1) else n - 2
    return BranchPointSet(real_pairs, c, genus, doubles)


def smallest_y_root(curve):
    """Real part of the zero of the discriminant (in y = z^2) closest to 0.

    Its sign flips when a pair of branch points passes through z = 0 from
    the real to the imaginary axis; used to bisect for collisions.
    """
    yr = discriminant_y_roots(discriminant(curve))
    k = np.argmin(np.abs(yr))
    return float(yr[k].real)


def locate_collision(curve_of, lo, hi, tol=1e-10, max_iter=200):
    """Bisect on the parameter where the smallest discriminant y-root changes sign."""
    flo = smallest_y_root(curve_of(lo))
    fhi = smallest_y_root(curve_of(hi))
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise CurveError("no sign change of the smallest y-root in the bracket")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = smallest_y_root(curve_of(mid))
        if fm == 0 or hi - lo < tol:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Stieltjes inversion
# ---------------------------------------------------------------------------

def xi1_boundary(curve, x, scale=None):
    """xi_{1,+}(x) on the real line: eps -> 0 limit by Richardson from eps, 2 eps."""
    x = np.asarray(x, dtype=float)
    if scale is None:
        scale = 1.0 + _branch_radius(curve)
    eps = 1e-8 * scale
    r1 = solve_sheets(curve, x + 1j * eps)[..., 0]
    r2 = solve_sheets(curve, x + 2j * eps)[..., 0]
    return 2.0 * r1 - r2


def curve_density(curve, x):
    """Im xi_{1,+}(x) / pi."""
    return xi1_boundary(curve, x).imag / np.pi


def density_from_curve(curve, pts=None, grid=256, tol=1e-6):
    """mu1 from the curve by Stieltjes inversion, on the real branch intervals.

    ``grid`` is either a node count per interval (angle-substituted
    Gauss-Legendre) or an explicit array of points (trapezoid weights).
    """
    if pts is None:
        pts = branch_points(curve)
    ivs = pts.intervals
    if np.ndim(grid) == 0:
        xs, ws = [], []
        for a, b in ivs:
            x, w = angle_nodes(a, b, int(grid))
            xs.append(x)
            ws.append(w)
        x, w = np.concatenate(xs), np.concatenate(ws)
    else:
        g = np.sort(np.asarray(grid, dtype=float))
        x, w = [], []
        for a, b in ivs:
            sel = g[(g >= a) & (g <= b)]
            xx = np.concatenate([[a], sel[(sel > a) & (sel < b)], [b]])
            ww = np.zeros_like(xx)
            ww[1:] += 0.5 * np.diff(xx)
            ww[:-1] += 0.5 * np.diff(xx)
            x.append(xx)
            w.append(ww)
        x, w = np.concatenate(x), np.concatenate(w)
    rho = curve_density(curve, x)
    ref = max(1.0, float(np.max(np.abs(rho))))
    if np.any(rho < -tol * ref):
        raise CurveError("negative density from the curve: wrong (alpha, beta) or singular case")
    return RealMeasure(tuple(ivs), x, np.maximum(rho, 0.0), w)
