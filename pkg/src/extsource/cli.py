"""Command-line front end.

Exit codes: 0 success, 1 usage or IO error, 2 boundary-critical point,
3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields

import numpy as np

from .measures import EvenPolynomial, MeasureError, RealMeasure, gauss_legendre
from .quartic import PhaseError, classify, scan
from .solver import (SolverConfig, SolverError, _grid, confinement_radius,
                     mu2_from_mu1, solve)

log = logging.getLogger("extsource")

EXIT_OK, EXIT_USAGE, EXIT_CRITICAL, EXIT_FAILED = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    # solver
    n_cells: int = 800
    axis_nodes: int = 1024
    tol: float = 1e-9
    damping: float = 0.5
    max_iters: int = 400
    # curve
    root_tol: float = 1e-6
    band: float = 1e-6
    # verify
    n: int = 16
    chains: int = 64
    steps: int = 220
    burn_in: int = 60
    seed: int = -1
    # output
    out: str = "."

    def solver(self):
        return SolverConfig(n_cells=self.n_cells, axis_nodes=self.axis_nodes, tol=self.tol,
                            damping=self.damping, max_iters=self.max_iters)

    def validate(self):
        for name in ("tol", "root_tol", "band"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive")
        if self.n <= 0 or self.n % 2:
            raise UsageError("n must be a positive even integer")


def read_config(path):
    """Flat key = value text file; '#' starts a comment."""
    types = {f.name: f.type for f in fields(RunConfig)}
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    for k, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{k}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise UsageError(f"{path}:{k}: unknown key {key!r}")
        conv = {"int": int, "float": float, "str": str}[types[key]]
        try:
            out[key] = conv(val)
        except ValueError as exc:
            raise UsageError(f"{path}:{k}: bad value for {key}") from exc
    return out


def build_config(args):
    cfg = RunConfig()
    if getattr(args, "config", None):
        for k, v in read_config(args.config).items():
            setattr(cfg, k, v)
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, header, rows, meta=None):
    try:
        with open(path, "w") as fh:
            for k, v in (meta or {}).items():
                fh.write(f"# {k}={v if isinstance(v, str) else json.dumps(v)}\n")
            fh.write(",".join(header) + "\n")
            for r in rows:
                fh.write(",".join(fmt(v) for v in r) + "\n")
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def read_csv(path):
    """(metadata dict, header, float-or-str columns) as written by write_csv."""
    meta, header, rows = {}, None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                try:
                    meta[k] = json.loads(v)
                except json.JSONDecodeError:
                    meta[k] = v
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append(line.split(","))
    cols = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in rows]
        try:
            cols[name] = np.array([float(v) if v != "" else np.nan for v in vals])
        except ValueError:
            cols[name] = vals
    return meta, header, cols


def write_json(path, obj):
    try:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2, default=_json_default)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def _finite(d):
    # json has no inf/nan
    return {k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in d.items()}


def parse_potential(text):
    try:
        return EvenPolynomial(tuple(float(s) for s in text.split(",")))
    except (ValueError, MeasureError) as exc:
        raise UsageError(f"bad --potential: {exc}") from exc


def potential_from_args(args):
    if getattr(args, "potential", None):
        return parse_potential(args.potential)
    if args.t is None:
        raise UsageError("give --t (quartic) or --potential")
    return EvenPolynomial.quartic(args.t)


def check_a(a):
    if a is None or not a > 0:
        raise UsageError("--a must be positive")


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------

def classify_summary(p):
    out = {"t": p.t, "a": p.a, "case": p.case, "genus": p.genus, "alpha": p.alpha,
           "beta": p.beta, "critical": p.critical, "message": p.message,
           "distances": p.boundary_flags.get("distance", {})}
    if p.branch is not None:
        out["branch_points"] = {
            "real_pairs": [float(x) for x in p.branch.real_pairs],
            "imaginary": None if p.branch.imaginary_pair is None else float(p.branch.imaginary_pair),
            "multiple": [[complex(x).real, complex(x).imag, int(m)] for x, m in p.branch.double_roots],
        }
    return out


def cmd_classify(args):
    check_a(args.a)
    cfg = build_config(args)
    p = classify(args.t, args.a, cfg.band, cfg.root_tol)
    line = f"Case {p.case} genus {p.genus} alpha {fmt(p.alpha)} beta {fmt(p.beta)}"
    if p.branch is not None:
        line += " branch " + " ".join(fmt(float(x)) for x in p.branch.real_pairs)
        if p.branch.imaginary_pair is not None:
            line += f" imaginary {fmt(float(p.branch.imaginary_pair))}"
    d = p.boundary_flags.get("distance", {})
    line += " " + " ".join(f"d{k} {v:.3e}" for k, v in d.items())
    if p.critical:
        line += f" critical ({p.message})"
    print(line)
    if args.json:
        write_json(args.json, classify_summary(p))
    return EXIT_CRITICAL if p.critical else EXIT_OK


# ---------------------------------------------------------------------------
# phase-scan
# ---------------------------------------------------------------------------

def _range(text, name):
    try:
        lo, hi = (float(s) for s in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--{name} expects lo,hi") from exc
    if not hi > lo:
        raise UsageError(f"--{name}: hi must exceed lo")
    return lo, hi


def cmd_phase_scan(args):
    cfg = build_config(args)
    t_range = _range(args.t_range, "t-range")
    a_lo, a_hi = _range(args.a_range, "a-range")
    res = args.resolution
    if res <= 0:
        raise UsageError("--resolution must be positive")
    # a = 0 is outside the model: a half-open range starts one step above lo
    if a_lo <= 0:
        a_lo = a_lo + (a_hi - a_lo) / res
    rows, curves = scan(t_range, (a_lo, a_hi), res, cfg.band, cfg.root_tol, args.jobs)
    os.makedirs(cfg.out, exist_ok=True)
    scan_path = os.path.join(cfg.out, "scan.csv")
    write_csv(scan_path, ["t", "a", "case", "genus", "alpha", "beta"],
              [(r.t, r.a, r.region or "none", "" if r.genus is None else r.genus,
                r.alpha, r.beta) for r in rows],
              {"t_range": list(t_range), "a_range": [a_lo, a_hi], "resolution": res})
    brows = [(name, float(t), float(a)) for name in ("A1", "A2", "A3")
             for t, a in zip(*curves[name])]
    write_csv(os.path.join(cfg.out, "boundaries.csv"), ["curve", "t", "a"], brows)
    counts = {}
    for r in rows:
        counts[r.region or "none"] = counts.get(r.region or "none", 0) + 1
    print(f"{len(rows)} points " + " ".join(f"{k}:{v}" for k, v in sorted(counts.items())))
    return EXIT_OK


# ---------------------------------------------------------------------------
# density
# ---------------------------------------------------------------------------

def _curve_cell_averages(curve, intervals, edges, order=24):
    """Cell averages of the curve density; square-root edges handled by u^2 substitution."""
    from .curve import curve_density
    lo, hi = edges[:-1], edges[1:]
    u, wu = gauss_legendre(0.0, 1.0, order)
    cells, xs, ws = [], [], []
    for a, b in intervals:
        mid = 0.5 * (a + b)
        for k in np.nonzero((hi > a) & (lo < b))[0]:
            p, q = max(lo[k], a), min(hi[k], b)
            # split at the interval midpoint; each half is graded towards its edge
            for e, f in ((p, min(q, mid)), (max(p, mid), q)):
                if f <= e:
                    continue
                if abs(e - a) < abs(f - b):
                    xs.append(e + (f - e) * u * u)
                else:
                    xs.append(f - (f - e) * u * u)
                ws.append((f - e) * 2 * u * wu)
                cells.append(k)
    out = np.zeros(len(lo))
    if cells:
        rho = curve_density(curve, np.concatenate(xs)).reshape(len(cells), order)
        np.add.at(out, np.array(cells), np.sum(rho * np.array(ws), axis=1))
    return out / (hi - lo)


def density_by_curve(V, a, cfg, X=None):
    from .curve import mclaughlin_curve, pastur_curve
    t = V.quartic_t()
    if V.is_quadratic():
        from .curve import branch_points
        curve = pastur_curve(a)
        pts = branch_points(curve, cfg.root_tol)
        case, alpha, beta = pts.case, 0.0, 0.0
    elif t is not None:
        p = classify(t, a, cfg.band, cfg.root_tol)
        if p.branch is None:
            raise UsageError(f"curve method unavailable at this point: {p.message}")
        curve = mclaughlin_curve(t, a, p.alpha, p.beta)
        pts, case = p.branch, p.case
    else:
        raise UsageError("method=curve needs a quadratic or quartic potential")
    X = X or confinement_radius(V, a)
    edges = _grid(X, cfg.n_cells)
    dens = _curve_cell_averages(curve, pts.intervals, edges)
    mu1 = RealMeasure.histogram(edges, dens)
    mu2, c = mu2_from_mu1(mu1, a, cfg.axis_nodes)
    return {"mu1": mu1, "mu2": mu2, "c": c, "case": case, "ell": None, "residuals": None}


def refine_edges(edges, density, support, skip=3, fit=9, order=32):
    """Replace the cells next to each support edge by cell averages of a fitted sqrt profile.

    Piecewise-constant cells resolve a square-root edge only to O(sqrt(h)), so the two or
    three cells nearest an edge carry most of the discretization error.  rho^2 is fitted by a
    quadratic on the `fit` cells after the first `skip` ones and integrated back over them.
    """
    d = np.array(density, float)
    x = 0.5 * (edges[1:] + edges[:-1])
    u, w = gauss_legendre(-1.0, 1.0, order)
    for lo, hi in support:
        k_lo, k_hi = np.searchsorted(edges, [lo, hi]) - 1
        if k_hi - k_lo < 2 * (skip + fit):
            continue
        for k0, step in ((k_lo, 1), (k_hi, -1)):
            cells = k0 + step * np.arange(skip, skip + fit)
            coef = np.polyfit(x[cells], d[cells] ** 2, 2)
            for k in k0 + step * np.arange(-2, skip):
                if 0 <= k < len(d):
                    s = 0.5 * (edges[k] + edges[k + 1]) + 0.5 * (edges[k + 1] - edges[k]) * u
                    d[k] = 0.5 * np.sum(np.sqrt(np.maximum(np.polyval(coef, s), 0.0)) * w)
    return d


def density_by_solve(V, a, cfg):
    sol = solve(V, a, cfg.solver())
    rho1 = refine_edges(sol.mu1.edges, sol.mu1.density, sol.support)
    return {"mu1": sol.mu1, "rho1": rho1, "mu2": sol.mu2, "c": sol.c, "case": sol.case,
            "ell": sol.ell, "residuals": _finite(sol.residuals.as_dict()),
            "iterations": sol.iterations}


def cmd_density(args):
    check_a(args.a)
    cfg = build_config(args)
    V = potential_from_args(args)
    if args.method == "curve":
        res = density_by_curve(V, args.a, cfg)
    else:
        res = density_by_solve(V, args.a, cfg)
    mu1, mu2 = res["mu1"], res["mu2"]
    x = mu1.nodes
    rho1 = res.get("rho1", mu1.density)
    y = np.linspace(0.0, float(x[-1]) + res["c"], len(x))
    rho2 = mu2.density_at(y)
    meta = {"method": args.method, "potential": list(V.coeffs), "a": args.a,
            "case": res["case"], "c": res["c"], "ell": res["ell"], "residuals": res["residuals"],
            "rho1": "cell averages on the solve grid", "rho2": "pointwise on iR, per |dz|"}
    path = args.out_file or os.path.join(cfg.out, "density.csv")
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    write_csv(path, ["x", "rho1", "y", "rho2"], zip(x, rho1, y, rho2), meta)
    print(f"Case {res['case']} c {fmt(res['c'])} -> {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

RESIDUAL_TOL = 1e-4
MARGIN_TOL = 1e-6


def verify_variational(V, a, cfg, args):
    sol = solve(V, a, cfg.solver())
    r = sol.residuals
    checks = {
        "eq_residual_mu1": r.eq_residual_mu1 < RESIDUAL_TOL,
        "eq_residual_mu2": r.eq_residual_mu2 < RESIDUAL_TOL,
        "ineq_margin_mu1": r.ineq_margin_mu1 >= -MARGIN_TOL,
        "ineq_margin_mu2": r.ineq_margin_mu2 >= -MARGIN_TOL,
    }
    return {"case": sol.case, "c": sol.c, "iterations": sol.iterations,
            "residuals": _finite(r.as_dict()), "checks": checks}


def _support_of(V, a, cfg):
    sol = solve(V, a, cfg.solver())
    return sol


def verify_mcmc(V, a, cfg, args):
    from .finite_n import EnsembleSpec, density_comparison, sample_eigenvalues
    sol = _support_of(V, a, cfg)
    spec = EnsembleSpec(V, a, cfg.n)
    s = sample_eigenvalues(spec, cfg.chains, cfg.steps, cfg.seed, burn_in=cfg.burn_in)
    ks = density_comparison(s, sol.mu1)
    eig = s.pooled
    se = float(np.std(s.eigenvalues.mean(axis=(1, 2))) / np.sqrt(s.eigenvalues.shape[0]))
    checks = {"ks": ks["ks"] < 0.15, "symmetry": abs(float(eig.mean())) <= 3 * max(se, 1e-12)}
    out = {"case": sol.case, "support": sol.support, "ks": ks, "mean": float(eig.mean()),
           "mean_se": se, "acceptance": s.acceptance, "warnings": s.warnings}
    gaps = [(sol.support[k][1], sol.support[k + 1][0]) for k in range(len(sol.support) - 1)]
    if gaps:
        # eigenvalues deep inside a gap of supp(mu1) should be rare
        frac = []
        for lo, hi in gaps:
            pad = 0.25 * (hi - lo)
            frac.append(float(np.mean((eig > lo + pad) & (eig < hi - pad))))
        out["gap_fraction"] = frac
        checks["gap"] = max(frac) < 0.01
    out["checks"] = checks
    return out


def verify_mop(V, a, cfg, args):
    from .finite_n import EnsembleSpec, mop_from_moments
    sol = _support_of(V, a, cfg)
    mop = mop_from_moments(EnsembleSpec(V, a, cfg.n))
    z = mop.zeros
    real = bool(np.all(np.abs(z.imag) < 1e-8 * max(1.0, np.max(np.abs(z)))))
    zr = np.sort(z.real)
    paired = bool(np.allclose(zr, -zr[::-1], atol=1e-8))
    inside = all(any(lo - 0.15 <= x <= hi + 0.15 for lo, hi in sol.support) for x in zr)
    return {"zeros": zr, "support": sol.support, "condition": mop.condition,
            "checks": {"real": real, "paired": paired, "within_support": inside}}


def verify_charpoly(V, a, cfg, args):
    from .finite_n import EnsembleSpec, avg_char_poly_check, sample_eigenvalues
    spec = EnsembleSpec(V, a, cfg.n)
    s = sample_eigenvalues(spec, cfg.chains, cfg.steps, cfg.seed, burn_in=cfg.burn_in)
    zs = np.array([float(v) for v in args.z.split(",")]) if args.z else np.linspace(-2.5, 2.5, 5)
    pts = avg_char_poly_check(spec, s, zs)
    return {"points": [{"z": p.z, "monte_carlo": p.monte_carlo, "exact": p.exact,
                        "std_error": p.std_error, "verdict": p.verdict} for p in pts],
            "checks": {f"z={fmt(p.z)}": p.verdict != "fail" for p in pts}}


SUITES = {"variational": verify_variational, "mcmc": verify_mcmc, "mop": verify_mop,
          "charpoly": verify_charpoly}


def cmd_verify(args):
    check_a(args.a)
    if args.seed is None:
        raise UsageError("verify needs --seed")
    cfg = build_config(args)
    V = potential_from_args(args)
    report = SUITES[args.suite](V, args.a, cfg, args)
    ok = all(report["checks"].values())
    report.update({"suite": args.suite, "a": args.a, "potential": list(V.coeffs),
                   "config": asdict(cfg), "passed": ok})
    path = args.json or os.path.join(cfg.out, f"verify_{args.suite}.json")
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    write_json(path, report)
    for k, v in report["checks"].items():
        print(f"{'PASS' if v else 'FAIL'} {k}")
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    ap = _Parser(prog="extsource", description="External source model: phases, equilibrium "
                 "measures and finite-n checks.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, point=True):
        if point:
            p.add_argument("--t", type=float)
            p.add_argument("--a", type=float)
        p.add_argument("--config")
        p.add_argument("--out")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        p.add_argument("--band", type=float)
        p.add_argument("--root-tol", dest="root_tol", type=float)

    p = sub.add_parser("classify", help="classify one (t, a) point")
    common(p)
    p.add_argument("--json")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("phase-scan", help="scan the (t, a) plane")
    common(p, point=False)
    p.add_argument("--t-range", default="0,4")
    p.add_argument("--a-range", default="0,1.5")
    p.add_argument("--resolution", type=int, default=50)
    p.set_defaults(func=cmd_phase_scan)

    p = sub.add_parser("density", help="emit mu1 and mu2 densities")
    common(p)
    p.add_argument("--potential")
    p.add_argument("--method", choices=("curve", "solve"), default="solve")
    p.add_argument("--n-cells", dest="n_cells", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--out-file", dest="out_file")
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("verify", help="run a verification suite")
    common(p)
    p.add_argument("--suite", choices=tuple(SUITES), required=True)
    p.add_argument("--potential")
    p.add_argument("--n", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-cells", dest="n_cells", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--z", help="comma separated real z points (charpoly suite)")
    p.add_argument("--json")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PhaseError, MeasureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        if getattr(exc, "report", None) is not None:
            print(json.dumps(_finite(exc.report.as_dict()) if hasattr(exc.report, "as_dict")
                             else str(exc.report)), file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
