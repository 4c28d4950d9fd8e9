"""Stability and generalisation of delayed SGD on quadratic empirical risk."""

from .bounds import (
    BoundInputs, BoundReport, appendix_term_bounds, corollary_random_bound, prop1_bound,
    theorem_bound, thm1_bound, thm2_bound,
)
from .dataset import (
    Dataset, LibsvmParseError, QuadraticDistribution, Sample, SplitSpec, load_libsvm,
    make_distribution, make_spectrum, parse_libsvm, serialize_libsvm, split, synth_quadratic,
)
from .engine import (
    DivergenceError, FixedDelay, RandomDelay, RunConfig, Trajectory, TwinRun, generalization_error,
    run, twin_run,
)
from .genfun import CoeffTable, inversion_residual, pi_coeffs, t0, verify_lemma2, weighted_partial_sums
from .harness import ExperimentConfig, emit_results, estimate_avg_stability, run_gen_sweep, verify_lemma_grid
from .problem import QuadraticProblem, SpectralConstants, SpectralEstimationError, ridge_for_condition

__version__ = "0.1.0"
