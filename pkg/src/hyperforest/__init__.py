"""Exact duals, forest oracles, and MCMC checks for hyperbolic t-fields.

The package has three legs that check each other:

* exact Grassmann/fermionic computation of the partition function and
  its observables (:mod:`hyperforest.grassmann`,
  :mod:`hyperforest.fermionic`, :mod:`hyperforest.coeffs`),
* an independent spanning-forest oracle for the same quantities
  (:mod:`hyperforest.forests`),
* an adaptive MCMC sampler of the continuous t-field measure with
  quadrature references and decay-bound comparisons
  (:mod:`hyperforest.sampler`, :mod:`hyperforest.bounds`).

:mod:`hyperforest.graphs` holds the shared weighted-graph core and
:mod:`hyperforest.cli` the command-line front end (``hyperforest``).
"""

from .graphs import (NotPositiveDefinite, RangeError, WeightedGraph,
                     complete_graph, cycle_graph, grid_box, path_graph,
                     vertex_at)
from .grassmann import (Algebra, BerezinConvention, CapExceeded, OddElement,
                        NonpositiveConstantTerm, UniverseMismatch, apply_Q,
                        berezin_integrate, integrate_all_sites)
from .forests import (TooLarge, ZeroPartition, connection_probability,
                      enumerate_forests, forest_green, partition_forest)
from .fermionic import (AssertionFailure, DegreeCertificateFailed,
                        FermionicModel, IndexBudgetExceeded, build_action,
                        dual_moment, partition_fermionic, positivity_scan,
                        z_polynomial_in_edge)
from .coeffs import (DomainError, HomogeneityViolation,
                     build_coefficient_table, verify_c_inequalities,
                     verify_domination)
from .sampler import (ExperimentalWarning, McmcConfig, NonConvergenceWarning,
                      SampleSet, fourier_estimate, laplace_estimate,
                      moment_estimate, quadrature_expectation, run_chains)
from .bounds import (GeometryError, SingularSystem, build_rho_fourier,
                     build_rho_laplace, fourier_bound, laplace_constants)

__all__ = [
    "WeightedGraph", "complete_graph", "path_graph", "cycle_graph",
    "grid_box", "vertex_at", "NotPositiveDefinite", "RangeError",
    "Algebra", "BerezinConvention", "apply_Q", "berezin_integrate",
    "integrate_all_sites", "CapExceeded", "UniverseMismatch", "OddElement",
    "NonpositiveConstantTerm",
    "enumerate_forests", "partition_forest", "connection_probability",
    "forest_green", "TooLarge", "ZeroPartition",
    "FermionicModel", "build_action", "partition_fermionic", "dual_moment",
    "z_polynomial_in_edge", "positivity_scan", "AssertionFailure",
    "DegreeCertificateFailed", "IndexBudgetExceeded",
    "build_coefficient_table", "verify_c_inequalities", "verify_domination",
    "DomainError", "HomogeneityViolation",
    "McmcConfig", "SampleSet", "run_chains", "moment_estimate",
    "fourier_estimate", "laplace_estimate", "quadrature_expectation",
    "NonConvergenceWarning", "ExperimentalWarning",
    "fourier_bound", "build_rho_fourier", "build_rho_laplace",
    "laplace_constants", "GeometryError", "SingularSystem",
]
