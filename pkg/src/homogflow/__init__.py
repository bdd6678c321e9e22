"""Two-continuum multiscale stochastic flow toolkit.

Numerical machinery for the coupled slow-diffusion / fast-exchange system:
periodic cell problems and effective tensors, exact spectral simulation of the
fast Ornstein-Uhlenbeck pair, invariant-measure averaging of the exchange
coefficient, IMEX time stepping of the oscillatory and averaged systems, and
seeded convergence studies of the small-epsilon limit.
"""

from .coeffs import (AlphaSpec, CoefficientError, CoefficientSet, ForcingSpec,
                     TensorSpec, eval_alpha, eval_forcing, eval_tensor,
                     validate)
from .grid import (DIRICHLET, PERIODIC, FieldPair, Mesh, ScalarField,
                   SmoothField, SolverError, assemble_diffusion, h1_pairing,
                   h1_seminorm, l2_norm, sample_face_tensor, weak_pairing)
from .cell import (CellSolution, corrector_test_function, effective_tensor,
                   solve_cell)
from .fastsde import (InvariantMarginal, OUState, SpectralNoise,
                      coupling_contraction_check, invariant_marginal,
                      make_ou_state, make_spectral_noise, mild_closed_form,
                      mild_reference, ou_step, sample_invariant)
from .slowpde import (EpsilonRunConfig, Trajectory, simulate, weak_residual)
from .avg import (AveragedAlphaEvaluator, build_alpha_table, mc_averaged_alpha,
                  solve_averaged)
from .ergodic import (ExchangeProbe, LinearProbe, MixingReport,
                      SDecomposition, mixing_gap, mixing_report,
                      s_decomposition, window_average_error)
from .harness import (ConfigError, ConvergenceReport, ExperimentConfig,
                      emit_report, load_config, parse_config, read_report,
                      run_convergence)
from .seeding import derive_seed, make_rng, mix64

__all__ = [
    "AlphaSpec", "CoefficientError", "CoefficientSet", "ForcingSpec",
    "TensorSpec", "eval_alpha", "eval_forcing", "eval_tensor", "validate",
    "DIRICHLET", "PERIODIC", "FieldPair", "Mesh", "ScalarField",
    "SmoothField", "SolverError", "assemble_diffusion", "h1_pairing",
    "h1_seminorm", "l2_norm", "sample_face_tensor", "weak_pairing",
    "CellSolution", "corrector_test_function", "effective_tensor",
    "solve_cell",
    "InvariantMarginal", "OUState", "SpectralNoise",
    "coupling_contraction_check", "invariant_marginal", "make_ou_state",
    "make_spectral_noise", "mild_closed_form", "mild_reference", "ou_step",
    "sample_invariant",
    "EpsilonRunConfig", "Trajectory", "simulate", "weak_residual",
    "AveragedAlphaEvaluator", "build_alpha_table", "mc_averaged_alpha",
    "solve_averaged",
    "ExchangeProbe", "LinearProbe", "MixingReport", "SDecomposition",
    "mixing_gap", "mixing_report", "s_decomposition", "window_average_error",
    "ConfigError", "ConvergenceReport", "ExperimentConfig", "emit_report",
    "load_config", "parse_config", "read_report", "run_convergence",
    "derive_seed", "make_rng", "mix64",
]
