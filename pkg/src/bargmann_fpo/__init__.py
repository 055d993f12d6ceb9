"""Resonance poles of truncated Bargmann-type potentials, computed in the
continuum and with a tight-binding effective Hamiltonian."""

__version__ = "0.1.0"

from .continuum import (PoleEstimate, TruncatedPotential, cutoff_phase_shift,
                        find_transcendental_poles, integrate_log_derivative, s_matrix_cut)
from .lattice import (LatticeModel, discretize, dispersion_k, eigenvalues_at, log_determinant,
                      phase_shift_sweep, solve_scattering)
from .poles import classify_poles, det_poles, fixed_point_solve, trace_trajectories
from .susy import (AnalyticPotential, DarbouxChainSpec, build_one_resonance, build_two_resonance,
                   exact_phase_shift, free_potential, jost_function)

__all__ = [
    "AnalyticPotential", "DarbouxChainSpec", "LatticeModel", "PoleEstimate", "TruncatedPotential",
    "build_one_resonance", "build_two_resonance", "classify_poles", "cutoff_phase_shift",
    "det_poles", "discretize", "dispersion_k", "eigenvalues_at", "exact_phase_shift",
    "find_transcendental_poles", "fixed_point_solve", "free_potential", "integrate_log_derivative",
    "jost_function", "log_determinant", "phase_shift_sweep", "s_matrix_cut", "solve_scattering",
    "trace_trajectories",
]
