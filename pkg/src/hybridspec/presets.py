"""Parameter sets from the device characterisation measurements.

The ensemble's reported width 3.434 MHz is taken as the FWHM of the
density; :func:`width_from_fwhm` converts it to the q-Gaussian width.
"""
from .params import SystemParams, width_from_fwhm

__all__ = ["KAPPA", "GAMMA_T", "G_T", "OMEGA_E", "Q_ENSEMBLE", "FWHM_ENSEMBLE",
           "F_R_JC", "F_R_ENSEMBLE", "F_S_ENSEMBLE", "F_TRIPLE", "F_T_IDLE",
           "jc_characterization", "ensemble_characterization", "triple_resonance"]

KAPPA = 0.171
GAMMA_T = 3.952
G_T = 17.490
OMEGA_E = 6.597
Q_ENSEMBLE = 1.9591
FWHM_ENSEMBLE = 3.434
F_R_JC = 3007.036
F_R_ENSEMBLE = 3002.001
F_S_ENSEMBLE = 3001.185
F_TRIPLE = 3001.2
F_T_IDLE = 3230.0  # transmon parked at its upper sweet spot


def _width():
    return width_from_fwhm(FWHM_ENSEMBLE, Q_ENSEMBLE)


def jc_characterization(detuning=0.0):
    """Resonator and transmon only; ``detuning = f_t - f_r``."""
    return SystemParams.build(
        f_r=F_R_JC, kappa=KAPPA, f_t=F_R_JC + detuning, gamma_t=GAMMA_T,
        f_s=F_R_JC, g_t=G_T, omega_e=0.0, q=Q_ENSEMBLE, width=_width())


def ensemble_characterization():
    """Resonator and spin ensemble with the transmon decoupled."""
    return SystemParams.build(
        f_r=F_R_ENSEMBLE, kappa=KAPPA, f_t=F_T_IDLE, gamma_t=GAMMA_T,
        f_s=F_S_ENSEMBLE, g_t=0.0, omega_e=OMEGA_E, q=Q_ENSEMBLE, width=_width())


def triple_resonance(f=F_TRIPLE):
    """All three subsystems tuned to ``f``."""
    return SystemParams.build(
        f_r=f, kappa=KAPPA, f_t=f, gamma_t=GAMMA_T, f_s=f, g_t=G_T,
        omega_e=OMEGA_E, q=Q_ENSEMBLE, width=_width())
