"""Transmission spectra, hybridised modes and parameter estimation for a
bus resonator coupled to a transmon and a broadened spin ensemble.

All frequencies, couplings and linewidths are in MHz (``omega / 2 pi``);
linewidths are full widths at half maximum.
"""
from .params import (ConfigError, DomainError, QGaussianDensity, SystemParams,
                     collective_linewidth_from_polariton, cooperativity, hybrid_coupling,
                     polariton_linewidth, qgaussian_eval, qgaussian_fwhm, qgaussian_normalize,
                     width_from_fwhm)
from .quadrature import QuadratureError, backend_name, use_backend
from .hamiltonian import (EigenConvergenceError, ResourceLimitError, bright_dark_transform,
                          build_hyperfine, build_single_excitation, effective_hamiltonian,
                          eigendecompose, enumerate_basis, jacobi_eigh, one_photon_transitions,
                          triple_resonance_modes, two_photon_transitions)
from .spectra import (Spectrum, SweepGrid, compute_spectrum, s21_bare, s21_resonator_ensemble,
                      s21_resonator_qubit, s21_tripartite, spin_susceptibility, sweep_transmon)
from .fitting import FitResult, Peak, find_peaks, fit_ensemble, fit_jc, fit_lorentzians, least_squares
from .stepwise import StepwiseError, stepwise_estimate

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DomainError", "QGaussianDensity", "SystemParams",
    "collective_linewidth_from_polariton", "cooperativity", "hybrid_coupling",
    "polariton_linewidth", "qgaussian_eval", "qgaussian_fwhm", "qgaussian_normalize",
    "width_from_fwhm", "QuadratureError", "backend_name", "use_backend",
    "EigenConvergenceError", "ResourceLimitError", "bright_dark_transform", "build_hyperfine",
    "build_single_excitation", "effective_hamiltonian", "eigendecompose", "enumerate_basis",
    "jacobi_eigh", "one_photon_transitions", "triple_resonance_modes",
    "two_photon_transitions", "Spectrum", "SweepGrid", "compute_spectrum", "s21_bare",
    "s21_resonator_ensemble", "s21_resonator_qubit", "s21_tripartite", "spin_susceptibility",
    "sweep_transmon", "FitResult", "Peak", "find_peaks", "fit_ensemble", "fit_jc",
    "fit_lorentzians", "least_squares", "StepwiseError", "stepwise_estimate", "__version__",
]
