"""Alternating minimization for the constrained vector equilibrium problem.

mu1 lives on R (mass 1), mu2 on iR (mass 1/2, density at most a/pi).
For fixed mu1 the optimal mu2 is explicit; for fixed mu2 the mu1 problem
is a convex quadratic program on a symmetric histogram grid.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .measures import (AxisMeasure, EvenPolynomial, MeasureError, RealMeasure, _cell_kernel,
                       axis_measure, energy, external_energy, log_potential,
                       runs_to_intervals, self_energy)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


@dataclass
class SolverConfig:
    n_cells: int = 800              # cells on [-X, X] (even)
    axis_nodes: int = 1024          # quadrature nodes for mu2
    tail_factor: float = 1000.0     # mu2 grid reaches tail_factor * X, K/y^2 beyond
    tol: float = 1e-9               # sup-norm change of the mu1 density
    damping: float = 0.5
    max_iters: int = 400
    max_restarts: int = 6
    qp_iters: int = 300             # accelerated projected gradient steps
    qp_tol: float = 1e-13
    X: Optional[float] = None
    support_threshold: float = 1e-8
    check_factor: int = 4           # check points per cell in variational_report
    energy_tol: float = 1e-12

    def __post_init__(self):
        if self.n_cells % 2:
            raise ValueError("n_cells must be even")
        for name in ("tol", "damping", "qp_tol", "support_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class VariationalReport:
    eq_residual_mu1: float
    ineq_margin_mu1: float
    eq_residual_mu2: float
    ineq_margin_mu2: float
    ell_spread: float = 0.0
    interior_margin_mu1: float = np.nan
    interior_margin_mu2: float = np.nan

    def as_dict(self):
        return {k: float(v) for k, v in self.__dict__.items()}


@dataclass
class EquilibriumSolution:
    mu1: RealMeasure
    mu2: AxisMeasure
    c: float
    ell: float
    residuals: Optional[VariationalReport]
    case: str
    iterations: int
    energy: float
    support: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    X: float = 0.0

    @property
    def n_intervals(self):
        return len(self.support)


# ---------------------------------------------------------------------------
# mu2 half-step
# ---------------------------------------------------------------------------

def _positive_part(mu1):
    """Right-half cells of a symmetric histogram (or nodes of a quadrature measure)."""
    if mu1.is_histogram:
        lo, hi = mu1.edges[:-1], mu1.edges[1:]
        sel = (lo >= 0) & (mu1.density > 0)
        return lo[sel], hi[sel], mu1.density[sel]
    return None


def inverse_moment(mu1, c):
    """int dmu1(s) / sqrt(s^2 + c^2) (c = 0 gives int dmu1 / |s|, possibly inf)."""
    part = _positive_part(mu1)
    if part is not None:
        lo, hi, d = part
        if c == 0:
            if np.any(lo == 0):
                return np.inf
            return float(2 * np.sum(d * np.log(hi / lo)))
        return float(2 * np.sum(d * (np.arcsinh(hi / c) - np.arcsinh(lo / c))))
    s, m = mu1.nodes, mu1.masses
    if c == 0:
        if np.any((s == 0) & (m > 0)):
            return np.inf
        with np.errstate(divide="ignore"):
            return float(np.sum(m / np.abs(s)))
    return float(np.sum(m / np.sqrt(s * s + c * c)))


def solve_c(mu1, a, rtol=1e-15):
    """Unique c > 0 with int dmu1 / sqrt(s^2 + c^2) = 2a.

    The left side decreases in c; the root is bracketed by doubling and found
    by Brent's method in log c, so tiny roots keep full relative accuracy.
    Returns 0.0 when the root lies below the smallest normal float.
    """
    f = lambda u: inverse_moment(mu1, np.exp(u)) - 2 * a
    if not inverse_moment(mu1, 0.0) > 2 * a:
        raise MeasureError("solve_c needs int dmu1/|s| > 2a")
    hi = 0.0
    while f(hi) > 0:
        hi += np.log(2.0)
        if hi > 60:
            raise MeasureError("could not bracket c")
    lo = hi - np.log(2.0)
    while f(lo) < 0:
        lo -= 8.0
        if lo < np.log(np.finfo(float).tiny):
            return 0.0
    u = brentq(f, lo, hi, xtol=rtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(np.exp(u))


def _atanh_kt(s, y, c):
    """(log(1 + k t), log(1 - k t)) for k = sqrt(1 - c^2/y^2), t = s / sqrt(s^2 + c^2).

    1 - k t = c^2 [1 / (y^2 (1 + k)) + k / (q (q + s))] with q = sqrt(s^2 + c^2)
    has no cancellation; the factor c^2 is kept in log form so tiny c does
    not underflow. s = 0 gives t = 0 exactly.
    """
    k = np.sqrt(1.0 - (c / y) ** 2)
    q = np.hypot(s, c)
    pos = s > 0
    qs = np.where(pos, q, 1.0)
    t = np.where(pos, s / qs, 0.0)
    inner = 1.0 / (y * y * (1.0 + k)) + k / (qs * (qs + s))
    log_one_kt = np.where(pos, 2.0 * np.log(c) + np.log(inner), 0.0)
    return np.log1p(k * t), log_one_kt


def mu2_profile(mu1, a, c):
    """Exact density of mu2 at |y| for given mu1 and c (vectorized over y)."""
    part = _positive_part(mu1)

    if c == 0:
        def profile(y):
            y = np.abs(np.asarray(y, dtype=float))
            out = np.empty(y.shape)
            flat, res = y.ravel(), out.ravel()
            if part is not None:
                lo, hi, d = part
                for k in range(0, flat.size, 512):
                    yy = flat[k:k + 512, None] ** 2
                    # int s/(y^2+s^2) ds = log(y^2+s^2)/2 ; two symmetric halves
                    res[k:k + 512] = np.sum(d * 0.5 * np.log1p((hi * hi - lo * lo) / (yy + lo * lo)),
                                            axis=1) * 2 / (2 * np.pi)
            else:
                s, m = np.abs(mu1.nodes), mu1.masses
                res[:] = np.sum(m * s / (flat[:, None] ** 2 + s * s), axis=1) / (2 * np.pi)
            return out
        return profile

    def profile(y):
        y = np.abs(np.asarray(y, dtype=float))
        out = np.full(y.shape, a / np.pi)
        flat, res = y.ravel(), out.ravel()
        outside = np.nonzero(flat > c)[0]
        for k in range(0, outside.size, 512):
            idx = outside[k:k + 512]
            yy = flat[idx][:, None]
            r = np.sqrt(yy * yy - c * c)
            if part is not None:
                lo, hi, d = part
                # with t = s / sqrt(s^2+c^2): y r int ds / ((y^2+s^2) sqrt(s^2+c^2))
                # = artanh(r t / y) = (log(1 + kt) - log(1 - kt)) / 2
                p_hi, m_hi = _atanh_kt(hi, yy, c)
                p_lo, m_lo = _atanh_kt(lo, yy, c)
                integral = np.sum(d * ((p_hi - p_lo) - (m_hi - m_lo)), axis=1)
            else:
                s, m = mu1.nodes, mu1.masses
                integral = np.sum(m * yy * r / ((yy * yy + s * s) * np.sqrt(s * s + c * c)), axis=1)
            res[idx] = a / np.pi - integral / (2 * np.pi)
        return np.maximum(out, 0.0)
    return profile


def mu2_from_mu1(mu1, a, n_nodes=1024, Y=None):
    """Optimal mu2 for fixed symmetric mu1: returns (AxisMeasure, c)."""
    if not a > 0:
        raise MeasureError("a must be positive")
    R = mu1.support_radius()
    if Y is None:
        Y = 1000.0 * max(R, 1.0)
    capped = False
    if inverse_moment(mu1, 0.0) <= 2 * a:
        c = 0.0
    else:
        c = solve_c(mu1, a)
        # c below the float range: mu1 puts only a negligible mass next to 0,
        # the c -> 0 limit is the balayage profile capped at a/pi
        capped = c == 0.0
    if c >= Y:
        raise MeasureError("saturated segment longer than the axis grid")
    prof = mu2_profile(mu1, a, c)
    if capped:
        base = prof

        def prof(y):
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.minimum(np.nan_to_num(base(y), nan=np.inf), a / np.pi)
    return axis_measure(prof, c, a / np.pi, Y, n_nodes), c


# ---------------------------------------------------------------------------
# mu1 half-step: quadratic program on a symmetric grid
# ---------------------------------------------------------------------------

def project_simplex(v, total):
    """Euclidean projection onto {w >= 0, sum w = total}."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    k = np.arange(1, len(v) + 1)
    cond = u - css / k > 0
    r = k[cond][-1]
    theta = css[cond][-1] / r
    return np.maximum(v - theta, 0.0)


def _kkt_polish(H, g, total, active, max_iter=500, tol=1e-14):
    """Exact minimizer of w H w + g w on the simplex by an active-set method."""
    n = len(g)
    S = active.copy()
    if not S.any():
        S[np.argmin(g)] = True
    for it in range(max_iter):
        idx = np.nonzero(S)[0]
        k = len(idx)
        A = np.zeros((k + 1, k + 1))
        A[:k, :k] = 2 * H[np.ix_(idx, idx)]
        A[:k, k] = -1.0
        A[k, :k] = 1.0
        sol = np.linalg.solve(A, np.concatenate([-g[idx], [total]]))
        w = np.zeros(n)
        w[idx] = sol[:k]
        lam = sol[k]
        neg = w[idx] < 0
        if neg.any():
            # drop the most negative entries first
            worst = idx[neg]
            S[worst] = False
            continue
        grad = 2 * H @ w + g - lam
        scale = max(1.0, float(np.max(np.abs(g))))
        add = (~S) & (grad < -tol * scale)
        if not add.any():
            return w, lam, it
        S |= add
    raise SolverError("active-set polish did not converge")


def solve_simplex_qp(H, g, total, w0=None, iters=300, tol=1e-13):
    """min w H w + g w over w >= 0, sum w = total.

    Accelerated projected gradient to find the active set, then an exact
    KKT solve on it. Returns (w, multiplier).
    """
    n = len(g)
    Lip = 2 * float(np.linalg.eigvalsh(H)[-1])
    w = np.full(n, total / n) if w0 is None else project_simplex(np.asarray(w0, float), total)
    z, tk = w.copy(), 1.0
    for _ in range(iters):
        w_new = project_simplex(z - (2 * H @ z + g) / Lip, total)
        tk1 = 0.5 * (1 + np.sqrt(1 + 4 * tk * tk))
        z = w_new + (tk - 1) / tk1 * (w_new - w)
        if np.max(np.abs(w_new - w)) < tol * total:
            w = w_new
            break
        w, tk = w_new, tk1
    active = w > 1e-3 * np.max(w)
    if w0 is not None:
        active |= np.asarray(w0) > 0
    w, lam, _ = _kkt_polish(H, g, total, active, tol=tol)
    return w, lam


def _grid(X, n_cells):
    edges = np.linspace(-X, X, n_cells + 1)
    edges[n_cells // 2] = 0.0
    return edges


class _HalfGrid:
    """Symmetric grid on [-X, X] reduced to its right half."""

    def __init__(self, X, n_cells):
        self.X = float(X)
        self.edges = _grid(X, n_cells)
        self.h = self.edges[1] - self.edges[0]
        K = _cell_kernel(self.edges)
        half = n_cells // 2
        R = slice(half, n_cells)
        L = slice(half - 1, None, -1) if half > 0 else slice(0, 0)
        # cell-mass kernel: K / h^2 converts densities to masses
        Krr = K[R, R] / self.h ** 2
        Krl = K[R, :half][:, ::-1] / self.h ** 2
        self.K_same = Krr
        self.K_cross = Krl
        self.right_edges = self.edges[half:]
        self.half = half

    def cell_average(self, f):
        e = self.right_edges
        mid = 0.5 * (e[1:] + e[:-1])
        fe, fm = f(e), f(mid)
        return (fe[:-1] + 4 * fm + fe[1:]) / 6.0

    def to_measure(self, w):
        """Half-grid masses (sum 1/2) -> symmetric histogram of mass 1."""
        dens_r = w / self.h
        dens = np.concatenate([dens_r[::-1], dens_r])
        return RealMeasure.histogram(self.edges, dens)


def _field_without_mu2(V, a):
    return lambda x: V(x) - a * np.abs(x)


def mu1_given_mu2(V, a, mu2, cfg=None, X=None, w0=None, grid=None):
    """Minimize I(mu) + int (V - a|x| - U^{mu2}) dmu over symmetric probability measures."""
    cfg = cfg or SolverConfig()
    if grid is None:
        grid = _HalfGrid(X if X is not None else (cfg.X or confinement_radius(V, a)), cfg.n_cells)
    H = 2 * (grid.K_same + grid.K_cross)
    if mu2 is None:
        q = grid.cell_average(_field_without_mu2(V, a))
    else:
        q = grid.cell_average(lambda x: V(x) - a * np.abs(x) - log_potential(mu2, x))
    # energy in half masses w (sum 1/2): w H w + 2 q w
    w, _ = solve_simplex_qp(H, 2 * q, 0.5, w0=w0, iters=cfg.qp_iters, tol=cfg.qp_tol)
    return grid.to_measure(w), w


def confinement_radius(V, a, n_cells=400, margin=1.1):
    """Half-width X of a window containing supp(mu1).

    The attraction to mu2 only confines mu1 further, so the support for the
    field V - a|x| alone bounds it; that problem is solved on a growing window.
    """
    X = 2.0
    for _ in range(40):
        grid = _HalfGrid(X, n_cells)
        H = 2 * (grid.K_same + grid.K_cross)
        q = grid.cell_average(_field_without_mu2(V, a))
        w, _ = solve_simplex_qp(H, 2 * q, 0.5, iters=200)
        pos = np.nonzero(w > 1e-10 * np.max(w))[0]
        b = grid.right_edges[pos[-1] + 1]
        if b < 0.9 * X:
            return margin * b + 2 * grid.h
        X *= 1.5
    raise SolverError("could not confine the support")


# ---------------------------------------------------------------------------
# Support and classification
# ---------------------------------------------------------------------------

def extract_support(mu1, threshold=1e-8, fit_cells=6):
    """Closure of {density > threshold * max}, endpoints refined by a sqrt fit."""
    d = mu1.density
    mask = d > threshold * np.max(d)
    ivs = runs_to_intervals(mu1.edges, mask)
    x = mu1.nodes
    out = []
    for lo, hi in ivs:
        inside = np.nonzero((x > lo) & (x < hi))[0]
        new = [lo, hi]
        if len(inside) >= fit_cells + 4:
            for side in (0, 1):
                if side == 0 and lo == 0.0 or side == 1 and hi == 0.0:
                    continue
                cells = inside[2:2 + fit_cells] if side == 0 else inside[-2 - fit_cells:-2]
                slope, icpt = np.polyfit(x[cells], d[cells] ** 2, 1)
                if slope != 0:
                    root = -icpt / slope
                    edge = lo if side == 0 else hi
                    if abs(root - edge) < 3 * (mu1.edges[1] - mu1.edges[0]):
                        new[side] = root
        out.append(tuple(new))
    # merge intervals that meet at 0 (no gap there)
    merged = []
    for iv in out:
        if merged and abs(merged[-1][1] - iv[0]) < 1e-14:
            merged[-1] = (merged[-1][0], iv[1])
        else:
            merged.append(iv)
    return merged


def classify_solution(c, n_intervals):
    if c == 0:
        return "I" if n_intervals % 2 == 0 else "singular"
    return "II" if n_intervals % 2 == 0 else "III"


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

def _semicircle_start(grid):
    e = grid.right_edges
    X = grid.X
    G = lambda x: (x * np.sqrt(np.clip(X * X - x * x, 0, None))
                   + X * X * np.arcsin(np.clip(x / X, -1, 1))) / (np.pi * X * X)
    w = G(e[1:]) - G(e[:-1])
    return 0.5 * w / np.sum(w)


def _ell_estimate(mu1, mu2, V, a, support, pts_per_cell=1):
    x = _support_points(mu1, support, pts_per_cell)
    vals = log_potential(mu2, x) - 2 * log_potential(mu1, x) - V(x) + a * np.abs(x)
    return float(np.mean(vals)), float(np.std(vals))


def _support_points(mu1, support, per_cell):
    h = mu1.edges[1] - mu1.edges[0]
    pts = []
    for lo, hi in support:
        n = max(2, int(np.ceil((hi - lo) / h * per_cell)))
        pts.append(np.linspace(lo, hi, n + 2)[1:-1])
    return np.concatenate(pts) if pts else np.empty(0)


def solve(V, a, cfg=None):
    """Alternate the exact mu2 step and the mu1 quadratic program."""
    cfg = cfg or SolverConfig()
    if not a > 0:
        raise ValueError("a must be positive")
    if not V.coeffs[-1] > 0:
        raise ValueError("V needs a positive leading coefficient")
    X = cfg.X or confinement_radius(V, a)
    grid = _HalfGrid(X, cfg.n_cells)
    Y = cfg.tail_factor * X

    theta = cfg.damping
    w = _semicircle_start(grid)
    mu1 = grid.to_measure(w)
    mu2, c = mu2_from_mu1(mu1, a, cfg.axis_nodes, Y)
    E = energy(mu1, mu2, V, a)
    energies = [E]
    restarts = 0
    it = 0
    w_qp = None
    for it in range(1, cfg.max_iters + 1):
        _, w_new = mu1_given_mu2(V, a, mu2, cfg, grid=grid, w0=w_qp)
        w_qp = w_new
        # fixed-point residual: distance between mu1 and its best response
        change = float(np.max(np.abs(w_new - w))) / grid.h
        if change < cfg.tol:
            # finish on the undamped best response, whose zeros are exact
            w, mu1 = w_new, grid.to_measure(w_new)
            mu2, c = mu2_from_mu1(mu1, a, cfg.axis_nodes, Y)
            E = energy(mu1, mu2, V, a)
            energies.append(E)
            break
        while True:
            w_try = (1 - theta) * w + theta * w_new
            mu1_try = grid.to_measure(w_try)
            mu2_try, c_try = mu2_from_mu1(mu1_try, a, cfg.axis_nodes, Y)
            E_try = energy(mu1_try, mu2_try, V, a)
            if E_try <= E + cfg.energy_tol * max(1.0, abs(E)):
                break
            theta *= 0.5
            restarts += 1
            log.info("energy increase %.3e, damping -> %.4f", E_try - E, theta)
            if restarts > cfg.max_restarts:
                raise SolverError("energy keeps increasing", {"iteration": it, "theta": theta})
        w, mu1, mu2, c, E = w_try, mu1_try, mu2_try, c_try, E_try
        energies.append(E)
        log.debug("iteration %d change %.3e energy %.15g c %.6g", it, change, E, c)
    else:
        raise SolverError(f"no convergence in {cfg.max_iters} iterations",
                          {"last_change": change, "energy": E})

    support = extract_support(mu1, cfg.support_threshold)
    ell, _ = _ell_estimate(mu1, mu2, V, a, support)
    sol = EquilibriumSolution(mu1, mu2, c, ell, None, classify_solution(c, len(support)),
                              it, E, support, energies, X)
    sol.residuals = variational_report(sol, V, a, cfg.check_factor)
    return sol


# ---------------------------------------------------------------------------
# Euler-Lagrange conditions
# ---------------------------------------------------------------------------

def _edge_excluded(pts, intervals, frac):
    keep = np.ones(pts.shape, bool)
    for lo, hi in intervals:
        pad = frac * (hi - lo)
        keep &= ~((pts > lo - pad) & (pts < lo + pad)) & ~((pts > hi - pad) & (pts < hi + pad))
    return keep


def variational_report(sol, V, a, per_cell=4, edge_frac=0.01, axis_nodes=8192):
    """Residuals of the four Euler-Lagrange conditions on dense check grids.

    mu2 is rebuilt from its exact profile on ``axis_nodes`` quadrature nodes.
    """
    mu1, mu2, support = sol.mu1, sol.mu2, sol.support
    if mu2.profile is not None and axis_nodes > len(mu2.nodes):
        mu2 = axis_measure(mu2.profile, mu2.c, mu2.ceiling, mu2.truncation, axis_nodes)
    X = mu1.edges[-1]
    h = mu1.edges[1] - mu1.edges[0]

    # condition on supp(mu1): 2U1 - U2 + V - a|x| + ell = 0
    x_in = _support_points(mu1, support, per_cell)
    x_in = x_in[_edge_excluded(x_in, support, edge_frac)]
    f_in = (2 * log_potential(mu1, x_in) - log_potential(mu2, x_in)
            + V(x_in) - a * np.abs(x_in))
    ell = float(np.mean(-f_in))
    eq1 = float(np.max(np.abs(f_in + ell))) if x_in.size else np.nan
    spread = float(np.std(f_in))

    # inequality off the support (gaps and outside, up to 1.5 X)
    x_all = np.linspace(-1.5 * X, 1.5 * X, int(3 * X / h * per_cell) + 1)
    off = np.ones(x_all.shape, bool)
    for lo, hi in support:
        off &= ~((x_all >= lo) & (x_all <= hi))
    x_off = x_all[off]
    g_off = (2 * log_potential(mu1, x_off) - log_potential(mu2, x_off)
             + V(x_off) - a * np.abs(x_off) + ell)
    ineq1 = float(np.min(g_off)) if x_off.size else np.inf
    interior = _edge_excluded(x_off, support, 0.05)
    ineq1_int = float(np.min(g_off[interior])) if interior.any() else np.inf

    # on the axis: 2U2 = U1 for |y| >= c, 2U2 < U1 for |y| < c
    c = sol.c
    R = max(abs(support[-1][1]), c) if support else max(X, c)
    y_out = c + np.linspace(0, 10 * R, int(10 * R / h * per_cell) + 2)[1:]
    diff_out = 2 * log_potential(mu2, 1j * y_out) - log_potential(mu1, 1j * y_out)
    eq2 = float(np.max(np.abs(diff_out)))
    if c > 0:
        y_in = np.linspace(0, c, int(c / h * per_cell) + 2)[:-1]
        marg = log_potential(mu1, 1j * y_in) - 2 * log_potential(mu2, 1j * y_in)
        ineq2 = float(np.min(marg))
        inner = y_in < (1 - 0.05) * c
        ineq2_int = float(np.min(marg[inner])) if inner.any() else np.nan
    else:
        ineq2, ineq2_int = np.inf, np.nan
    return VariationalReport(eq1, ineq1, eq2, ineq2, spread, ineq1_int, ineq2_int)


# ---------------------------------------------------------------------------
# Case I: two-measure problem of Angelesco type
# ---------------------------------------------------------------------------

def angelesco_energy(w, grid, V, a):
    """2 I(nu) + I(reflected nu, nu) + 2 int (V - a x) dnu for half masses w."""
    H = 2 * grid.K_same + grid.K_cross
    q = grid.cell_average(lambda x: V(x) - a * x)
    return float(w @ H @ w + 2 * q @ w)


def angelesco_solve(V, a, cfg=None):
    """Case I shortcut: minimize over the right half nu of mu1 alone.

    mu2 is then the balayage of nu onto iR, i.e. the c = 0 closed form.
    """
    cfg = cfg or SolverConfig()
    X = cfg.X or confinement_radius(V, a)
    grid = _HalfGrid(X, cfg.n_cells)
    H = 2 * grid.K_same + grid.K_cross
    q = grid.cell_average(lambda x: V(x) - a * x)
    w, _ = solve_simplex_qp(H, 2 * q, 0.5, iters=cfg.qp_iters, tol=cfg.qp_tol)
    mu1 = grid.to_measure(w)
    if inverse_moment(mu1, 0.0) > 2 * a:
        raise SolverError("not in Case I (the constraint on mu2 is active); use solve")
    Y = cfg.tail_factor * X
    mu2, c = mu2_from_mu1(mu1, a, cfg.axis_nodes, Y)
    E = energy(mu1, mu2, V, a)
    support = extract_support(mu1, cfg.support_threshold)
    ell, _ = _ell_estimate(mu1, mu2, V, a, support)
    sol = EquilibriumSolution(mu1, mu2, c, ell, None, classify_solution(c, len(support)),
                              1, E, support, [E], X)
    sol.residuals = variational_report(sol, V, a, cfg.check_factor)
    sol.angelesco_energy = angelesco_energy(w, grid, V, a)
    return sol
