"""Numerical toolkit for semiclassical spectral analysis of difference
operators on scaled lattices."""

from .core import (Interval, LatticeBox, OrderFunction, Symbol, TorusGrid,
                   builtin_symbol, check_elliptic_shifted, check_ess_bound,
                   check_periodicity, eval_symbol)
from .quantize import (OperatorMatrix, build_operator, change_quantization,
                       conjugated_symbol_leading, kernel_entry, sharp_product,
                       verify_composition)
from .spectral import (SpectralDecomposition, apply_function_exact,
                       cluster_count_sweep, count_eigenvalues, eigendecompose,
                       propagator, trace_f_comparison, trace_identity_check,
                       truncation_convergence)
from .semiclassics import (AlmostAnalyticExtension, BumpFunction,
                           SmoothingKernel, build_aae, hs_apply,
                           poisson_compare, scaled_fourier,
                           stationary_phase_check)
from .dynamics import (Hamiltonian, ParametrixAmplitude, PhaseSolution,
                       Trajectory, build_parametrix, check_phase_periodicity,
                       flow_step, initial_amplitude, parametrix_error_sweep,
                       solve_hamilton_jacobi, solve_transport_leading)
from .weyl import (VolumeResult, WeylReport, dos_vs_liouville_sweep,
                   liouville_measure, phase_space_volume, smoothed_dos,
                   weyl_experiment)
from .hypotheses import HypothesisCertificate, certify

__version__ = "0.1.0"
