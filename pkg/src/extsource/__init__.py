"""Equilibrium problems for Hermitian random matrices with an external source +-a."""

from .curve import (ClassificationError, CurveError, SpectralCurve, branch_points, curve_density,
                    density_from_curve, generic_curve, mclaughlin_curve, pastur_curve, solve_sheets)
from .finite_n import (EnsembleSpec, FiniteNError, avg_char_poly_check, density_comparison,
                       ks_distance, mop_from_moments, sample_eigenvalues)
from .measures import (AxisMeasure, EvenPolynomial, MeasureError, RealMeasure, cauchy_transform,
                       energy, log_potential)
from .quartic import PhaseError, PhasePoint, classify, scan
from .solver import (EquilibriumSolution, SolverConfig, SolverError, angelesco_solve, solve,
                     variational_report)

__version__ = "0.1.0"
