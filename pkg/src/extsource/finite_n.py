"""Finite-n checks: Metropolis sampling of the matrix ensemble, multiple
orthogonal polynomials from moments and the average characteristic
polynomial identity.

The ensemble has density proportional to exp(-n Tr(V(M) - A M)) on n x n
Hermitian matrices, A = diag(a, ..., a, -a, ..., -a) with n/2 copies each.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .measures import EvenPolynomial, RealMeasure, composite_gauss_legendre

log = logging.getLogger(__name__)


class FiniteNError(ValueError):
    pass


@dataclass(frozen=True)
class EnsembleSpec:
    V: EvenPolynomial
    a: float
    n: int

    def __post_init__(self):
        if self.n <= 0 or self.n % 2:
            raise FiniteNError("n must be a positive even integer")

    @property
    def source(self):
        h = self.n // 2
        return np.concatenate([np.full(h, float(self.a)), np.full(h, -float(self.a))])


@dataclass
class SampleResult:
    eigenvalues: np.ndarray      # (chains, samples, n)
    acceptance: np.ndarray       # per chain, after burn-in
    step: np.ndarray             # adapted step size per chain
    seed: int
    warnings: list = field(default_factory=list)

    @property
    def pooled(self):
        return self.eigenvalues.reshape(-1)

    @property
    def n_samples(self):
        return self.eigenvalues.shape[0] * self.eigenvalues.shape[1]


@dataclass
class MopResult:
    n: int
    coeffs: np.ndarray           # ascending, leading coefficient 1
    zeros: np.ndarray
    condition: float
    moments: np.ndarray = field(repr=False, default=None)

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, self.coeffs)


# ---------------------------------------------------------------------------
# Metropolis sampler
# ---------------------------------------------------------------------------

def _minimizers(V, a):
    """Real local minimizers of V(x) - a x."""
    p = V.derivative_coeffs().copy()
    p[0] -= a
    r = np.roots(p[::-1])
    r = r[np.abs(r.imag) < 1e-9].real
    d2 = np.polynomial.polynomial.polyval(r, p[1:] * np.arange(1, len(p)))
    return np.sort(r[d2 > 0])


class _Chains:
    """Batch of Metropolis chains with the action tracked incrementally."""

    def __init__(self, spec, chains, rng):
        self.spec, self.rng = spec, rng
        n = spec.n
        self.C = chains
        self.A = spec.source
        # start near the classical positions: +x for the +a block, -x for the other
        x0 = _minimizers(spec.V, abs(spec.a)) if spec.a != 0 else np.array([0.0])
        x0 = float(x0[-1]) if x0.size else 0.0
        diag = np.where(self.A >= 0, x0, -x0) if spec.a != 0 else np.zeros(n)
        self.M = np.zeros((chains, n, n), complex)
        self.M[:, np.arange(n), np.arange(n)] = diag
        self.quartic = spec.V.d <= 2
        self.v = np.zeros(2)
        self.v[:spec.V.d] = spec.V.coeffs
        self.refresh()

    def refresh(self):
        M = self.M
        if self.quartic:
            self.P = M @ M
            self.t2 = np.einsum("cij,cij->c", M.conj(), M).real
            self.t4 = np.einsum("cij,cij->c", self.P.conj(), self.P).real
        else:
            self.trV = self._trace_V(M)

    def _trace_V(self, M):
        lam = np.linalg.eigvalsh(M)
        return np.sum(self.spec.V(lam), axis=1)

    def step(self, step_size):
        C, n, rng = self.C, self.spec.n, self.rng
        ci = np.arange(C)
        i = rng.integers(0, n, C)
        j = rng.integers(0, n, C)
        i, j = np.minimum(i, j), np.maximum(i, j)
        offd = i != j
        g = rng.standard_normal((2, C))
        delta = step_size * np.where(offd, (g[0] + 1j * g[1]) / np.sqrt(2.0), g[0])
        Mii, Mij = self.M[ci, i, i].real, self.M[ci, i, j]

        # change of Tr(A M): only diagonal moves contribute
        dA = np.where(offd, 0.0, self.A[i] * delta.real)
        if self.quartic:
            dt2 = np.where(offd, 4 * (Mij.conj() * delta).real + 2 * np.abs(delta) ** 2,
                           2 * Mii * delta.real + delta.real ** 2)
            rows_new, dt4 = self._quartic_update(i, j, offd, delta)
            dS = n * (self.v[0] * dt2 + self.v[1] * dt4 - dA)
        else:
            Mp = self.M.copy()
            Mp[ci, i, j] += delta
            Mp[ci, j, i] += np.where(offd, delta.conj(), 0.0)
            trV = self._trace_V(Mp)
            dS = n * (trV - self.trV - dA)
        accept = np.log(rng.random(C)) < -dS
        if np.any(accept):
            k = ci[accept]
            ik, jk, dk = i[accept], j[accept], delta[accept]
            self.M[k, ik, jk] += dk
            od = offd[accept]
            self.M[k[od], jk[od], ik[od]] += dk[od].conj()
            if self.quartic:
                self.t2[k] += dt2[accept]
                self.t4[k] += dt4[accept]
                R = rows_new[accept]
                self.P[k, ik, :] = R[:, 0]
                self.P[k, jk, :] = R[:, 1]
                self.P[k, :, ik] = R[:, 0].conj()
                self.P[k, :, jk] = R[:, 1].conj()
                self.P[k, ik, ik] = self.P[k, ik, ik].real
            else:
                self.trV[k] = trV[accept]
        return accept

    def _quartic_update(self, i, j, offd, delta):
        """New rows i, j of M^2 after the move, and the change of Tr M^4."""
        ci = np.arange(self.C)
        M, P = self.M, self.P
        # rows i and j of M + E (for a diagonal move both are row i)
        R = np.stack([M[ci, i, :], M[ci, j, :]], axis=1)
        R[ci, 0, j] += delta
        dconj = np.where(offd, delta.conj(), 0.0)
        R[ci, 1, i] += dconj
        R[~offd, 1] = R[~offd, 0]
        # (M + E) rows times (M + E) = rows @ M + rows @ E; E has delta at
        # (i, j) and conj(delta) at (j, i), or only delta at (i, i)
        new = R @ M
        new[ci, :, j] += R[ci, :, i] * delta[:, None]
        new[ci, :, i] += R[ci, :, j] * dconj[:, None]
        old = np.stack([P[ci, i, :], P[ci, j, :]], axis=1)
        return new, self._changed_norm(new, i, j, offd) - self._changed_norm(old, i, j, offd)

    def _changed_norm(self, X, i, j, offd):
        # sum |.|^2 over rows {i, j} and columns {i, j} of a Hermitian matrix
        # whose rows i, j are X[:, 0], X[:, 1]
        ci = np.arange(self.C)
        a2 = np.abs(X) ** 2
        rows = a2.sum(axis=2)
        full = rows[:, 0] + offd * rows[:, 1]
        corner = a2[ci, 0, i] + offd * (a2[ci, 0, j] + a2[ci, 1, i] + a2[ci, 1, j])
        return 2 * full - corner


def sample_eigenvalues(spec, chains=8, steps=1000, seed=0, burn_in=None, thin=None,
                       target=0.3):
    """Pooled eigenvalues from Metropolis chains.

    ``steps`` counts sweeps per chain (one sweep is n(n+1)/2 single entry-pair
    proposals); the first ``burn_in`` sweeps adapt the step size towards the
    ``target`` acceptance and are discarded. Eigenvalues are recorded every
    ``thin`` sweeps afterwards.
    """
    n = spec.n
    burn_in = steps // 4 if burn_in is None else int(burn_in)
    thin = 1 if thin is None else int(thin)
    if steps <= burn_in:
        raise FiniteNError("steps must exceed burn_in")
    rng = np.random.default_rng(seed)
    ch = _Chains(spec, chains, rng)
    sweep = n * (n + 1) // 2
    size = np.full(chains, 0.5 / np.sqrt(n))
    # adapt on blocks of at least 100 proposals so the rate estimate is stable
    block = max(1, -(-100 // sweep))
    acc, count = np.zeros(chains), 0
    for s in range(burn_in):
        for _ in range(sweep):
            acc += ch.step(size)
        count += sweep
        ch.refresh()
        if (s + 1) % block == 0:
            size *= np.exp(np.clip(acc / count - target, -0.5, 0.5))
            acc, count = np.zeros(chains), 0
    out = []
    acc = np.zeros(chains)
    for s in range(steps - burn_in):
        for _ in range(sweep):
            acc += ch.step(size)
        ch.refresh()
        if s % thin == 0:
            out.append(np.linalg.eigvalsh(ch.M))
    rate = acc / ((steps - burn_in) * sweep)
    warnings = []
    for k, r in enumerate(rate):
        if not 0.1 <= r <= 0.7:
            msg = (f"chain {k}: acceptance {r:.3f} outside [0.1, 0.7]; "
                   f"try step size {size[k] * np.exp(r - target):.4g}")
            log.warning(msg)
            warnings.append(msg)
    log.info("acceptance rates %s", np.round(rate, 3))
    eig = np.stack(out, axis=1)
    return SampleResult(eig, rate, size, seed, warnings)


# ---------------------------------------------------------------------------
# Multiple orthogonal polynomials
# ---------------------------------------------------------------------------

def _weight_exponent(spec):
    """phi(x) = n (V(x) - a x - min), so w_1 = exp(-phi) peaks at 1."""
    V, a, n = spec.V, spec.a, spec.n
    xs = _minimizers(V, a)
    fmin = float(np.min(V(xs) - a * xs))
    return (lambda x: n * (V(x) - a * x - fmin)), xs


def weight_moments(spec, count, depth=64, order=20, cutoff=745.0):
    """m_k = int x^k w_1(x) dx for k < count, with w_1 scaled to peak 1.

    Composite Gauss-Legendre on a window where the exponent stays below
    ``cutoff``; ``depth`` panels per side of each minimizer, graded
    geometrically away from it.
    """
    phi, xs = _weight_exponent(spec)
    lo, hi = float(xs[0]) - 1.0, float(xs[-1]) + 1.0
    while phi(lo) < cutoff:
        lo -= 0.5 * (1 + abs(lo))
    while phi(hi) < cutoff:
        hi += 0.5 * (1 + abs(hi))
    # the weight has width ~ 1/sqrt(n) around each minimizer
    w = 1.0 / np.sqrt(spec.n)
    pts = [lo, hi]
    for x in xs:
        for sgn in (-1.0, 1.0):
            pts.extend(x + sgn * w * np.geomspace(1e-2, 1e3, depth // 2))
        pts.append(x)
    pts = np.unique(np.clip(pts, lo, hi))
    x, wt = composite_gauss_legendre(pts, order)
    f = np.exp(-phi(x)) * wt
    powers = x[None, :] ** np.arange(count)[:, None]
    return powers @ f


def mop_from_moments(spec, depth=64, max_condition=1e12):
    """Monic type II multiple orthogonal polynomial of degree n.

    int P(x) x^k w_j(x) dx = 0 for j = 1, 2 and k < n/2, with
    w_1 = exp(-n(V - a x)) and w_2(x) = w_1(-x).
    """
    n = spec.n
    h = n // 2
    m = weight_moments(spec, n + h, depth)
    sign = (-1.0) ** np.arange(n + h)
    m2 = m * sign
    rows, rhs = [], []
    for mom in (m, m2):
        for k in range(h):
            rows.append(mom[k:k + n])
            rhs.append(-mom[k + n])
    A = np.array(rows)
    b = np.array(rhs)
    # equilibrate rows and columns before judging the conditioning
    r = 1.0 / np.max(np.abs(A), axis=1)
    A, b = A * r[:, None], b * r
    s = 1.0 / np.max(np.abs(A), axis=0)
    A = A * s
    cond = float(np.linalg.cond(A))
    if not cond < max_condition:
        raise FiniteNError(f"moment system condition number {cond:.3g} exceeds "
                           f"{max_condition:.0e}; use a smaller n")
    p = np.linalg.solve(A, b) * s
    coeffs = np.concatenate([p, [1.0]])
    zeros = np.polynomial.polynomial.polyroots(coeffs)
    return MopResult(n, coeffs, zeros, cond, m)


def mop_degree_two(spec, depth=64):
    """Closed reduction for n = 2: P_2 = x^2 - m_2/m_0."""
    m = weight_moments(spec, 3, depth)
    return np.array([-m[2] / m[0], 0.0, 1.0])


# ---------------------------------------------------------------------------
# Average characteristic polynomial
# ---------------------------------------------------------------------------

@dataclass
class CharPolyPoint:
    z: complex
    monte_carlo: complex
    exact: complex
    std_error: float
    verdict: str

    @property
    def discrepancy(self):
        return abs(self.monte_carlo - self.exact)


def avg_char_poly_check(spec, samples, z_points, mop=None, sigmas=3.0):
    """Monte Carlo E det(z - M) against P_n(z).

    Each sample is paired with its reflection M -> -M. The standard error
    comes from per-chain means. A point is inconclusive when the standard
    error is larger than |P_n(z)| itself.
    """
    mop = mop or mop_from_moments(spec)
    eig = samples.eigenvalues
    out = []
    for z in np.atleast_1d(z_points):
        det = 0.5 * (np.prod(z - eig, axis=-1) + np.prod(z + eig, axis=-1))
        per_chain = det.mean(axis=1)
        est = per_chain.mean()
        se = float(np.std(per_chain, ddof=1) / np.sqrt(len(per_chain))) if len(per_chain) > 1 \
            else float(np.std(det) / np.sqrt(det.size))
        exact = mop(z)
        if se > abs(exact):
            verdict = "inconclusive"
        elif abs(est - exact) <= sigmas * se:
            verdict = "pass"
        else:
            verdict = "fail"
        if np.isrealobj(z) or np.imag(z) == 0:
            est, exact = float(np.real(est)), float(np.real(exact))
        out.append(CharPolyPoint(z, est, exact, se, verdict))
    return out


# ---------------------------------------------------------------------------
# Density comparison
# ---------------------------------------------------------------------------

def measure_cdf(mu, x):
    if mu.is_histogram:
        cum = np.concatenate([[0.0], np.cumsum(mu.masses)])
        return np.interp(x, mu.edges, cum, left=0.0, right=cum[-1])
    return np.concatenate([mu.cdf(part) for part in np.array_split(x, max(1, x.size // 4096))])


def ks_distance(samples, cdf):
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise FiniteNError("no samples")
    F = cdf(x)
    k = np.arange(1, x.size + 1) / x.size
    return float(max(np.max(k - F), np.max(F - (k - 1.0 / x.size))))


def density_comparison(samples, mu1, n=None):
    """Kolmogorov-Smirnov distance between the pooled eigenvalues and mu1."""
    eig = samples.pooled if isinstance(samples, SampleResult) else np.asarray(samples).ravel()
    if n is None and isinstance(samples, SampleResult):
        n = samples.eigenvalues.shape[-1]
    ks = ks_distance(eig, lambda x: measure_cdf(mu1, x))
    return {"ks": ks, "n": n, "samples": int(eig.size)}
