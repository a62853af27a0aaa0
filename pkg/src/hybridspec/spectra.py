"""Transmission spectra of the two-mode and tripartite models.

All models share one sign convention: every coupled mode enters the
resonator's complex detuning as a subtracted self-energy,

    S21(f) = 1 / (f_r - f - i kappa/2 - g_t^2 / (f_t - f - i gamma_t/2)
                  - omega_e^2 * chi(f)),

with ``chi`` the spin susceptibility of the broadened ensemble.  Dropping
a coupling gives the two-mode models exactly.  Overall scale is 1; traces
are max-normalised before any comparison.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import hamiltonian as ham
from .quadrature import cauchy_transform

__all__ = [
    "Spectrum", "SweepGrid", "MODELS", "DB_FLOOR", "jc_polariton_frequencies",
    "jc_polariton_linewidths", "spin_susceptibility", "s21_bare", "s21_resonator_qubit",
    "s21_resonator_ensemble", "s21_tripartite", "compute_spectrum", "sweep_transmon",
    "to_db", "add_noise", "add_sweep_noise",
]

DB_FLOOR = -60.0


def to_db(power, floor=DB_FLOOR):
    """``10 log10(power / max)`` with a lower floor (``None`` for no floor)."""
    power = np.asarray(power, dtype=float)
    peak = np.max(power)
    if not peak > 0:
        raise ValueError("trace has no positive power")
    with np.errstate(divide="ignore", invalid="ignore"):
        db = 10.0 * np.log10(power / peak)
    if floor is not None:
        db = np.where(np.isnan(db) | (db < floor), floor, db)
    return db


@dataclass(frozen=True)
class Spectrum:
    """Transmission trace on an ascending frequency grid.

    ``s21`` is the complex amplitude when known; ``power`` is ``|S21|^2``
    (possibly noisy) and is what the fitting code consumes.
    """

    freqs: np.ndarray
    power: np.ndarray
    s21: np.ndarray = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        p = np.asarray(self.power, dtype=float)
        if f.ndim != 1 or f.size < 1 or p.shape != f.shape:
            raise ValueError("freqs and power must be 1-D arrays of equal length")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise ValueError("frequencies must be strictly ascending")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "power", p)
        if self.s21 is not None:
            s = np.asarray(self.s21, dtype=complex)
            if s.shape != f.shape:
                raise ValueError("s21 length does not match freqs")
            object.__setattr__(self, "s21", s)

    @classmethod
    def from_s21(cls, freqs, s21, meta=None):
        s21 = np.asarray(s21, dtype=complex)
        return cls(freqs, np.abs(s21) ** 2, s21, dict(meta or {}))

    @classmethod
    def from_power(cls, freqs, power, meta=None):
        return cls(freqs, power, None, dict(meta or {}))

    def __len__(self):
        return self.freqs.size

    def db(self, floor=None):
        return to_db(self.power, floor)

    def normalized(self):
        """Copy scaled so that the largest power is 1."""
        scale = np.max(self.power)
        s21 = None if self.s21 is None else self.s21 / math.sqrt(scale)
        return Spectrum(self.freqs, self.power / scale, s21, dict(self.meta))


@dataclass(frozen=True)
class SweepGrid:
    """Normalised tripartite spectra for a set of transmon frequencies.

    ``magnitude_db`` has shape ``(len(freqs), len(sweep_values))``;
    ``branches`` and ``resonator_weights`` hold, per column, the
    one-excitation eigenfrequencies and their resonator populations.
    """

    sweep_values: np.ndarray
    freqs: np.ndarray
    magnitude_db: np.ndarray
    branches: np.ndarray = None
    resonator_weights: np.ndarray = None
    meta: dict = field(default_factory=dict, compare=False)
    power: np.ndarray = None

    def __post_init__(self):
        sv = np.atleast_1d(np.asarray(self.sweep_values, dtype=float))
        fr = np.atleast_1d(np.asarray(self.freqs, dtype=float))
        db = np.asarray(self.magnitude_db, dtype=float).reshape(fr.size, sv.size)
        if fr.size > 1 and not np.all(np.diff(fr) > 0):
            raise ValueError("probe frequencies must be strictly ascending")
        object.__setattr__(self, "sweep_values", sv)
        object.__setattr__(self, "freqs", fr)
        object.__setattr__(self, "magnitude_db", db)
        if self.power is not None:
            object.__setattr__(self, "power",
                               np.asarray(self.power, dtype=float).reshape(db.shape))

    def column_power(self, j):
        """Linear power of column ``j`` (the unfloored values when available)."""
        if self.power is not None:
            return self.power[:, j]
        return 10.0 ** (self.magnitude_db[:, j] / 10.0)

    def column(self, j):
        """Column ``j`` as a linear-power :class:`Spectrum`."""
        return Spectrum.from_power(self.freqs, self.column_power(j),
                                   {"f_t": float(self.sweep_values[j])})


def jc_polariton_frequencies(f_r, f_q, g):
    """Lower and upper polariton frequencies of a resonator-qubit pair."""
    if g < 0:
        raise ValueError("g must be non-negative")
    mean = 0.5 * (f_r + f_q)
    half = 0.5 * math.hypot(f_r - f_q, 2.0 * g)
    return mean - half, mean + half


def jc_polariton_linewidths(f_r, f_q, g, kappa, gamma_t):
    """FWHMs ``(gamma_minus, gamma_plus)`` of the two polaritons.

    The mixing angle solves ``tan(2 theta) = 2 g / (f_r - f_q)`` on
    ``[0, pi/2]``, so the upper polariton is resonator-like when ``f_r > f_q``.
    """
    if g < 0:
        raise ValueError("g must be non-negative")
    theta = 0.5 * math.atan2(2.0 * g, f_r - f_q)
    c2, s2 = math.cos(theta) ** 2, math.sin(theta) ** 2
    return kappa * s2 + gamma_t * c2, kappa * c2 + gamma_t * s2


def _closed_form_chi(d, f_p, gamma_s):
    return 1.0 / (d.f_center - f_p - 1j * (d.width + 0.5 * gamma_s))


def spin_susceptibility(d, f_p, gamma_s, method="quadrature", derivatives=False,
                        rel_tol=1e-8, tail_tol=1e-10):
    """``chi(f_p) = int rho(w) / (w - f_p - i gamma_s/2) dw`` for density ``d``.

    Parameters
    ----------
    d : QGaussianDensity
    f_p : float or array_like
        Probe frequencies, MHz.
    gamma_s : float
        Homogeneous spin linewidth (FWHM), MHz.
    method : {"quadrature", "closed"}
        ``"closed"`` uses the Lorentzian transform and requires ``q == 2``.
    derivatives : bool
        Also return ``{"f_center", "width", "q"}`` partial derivatives
        (``"q"`` is omitted for the closed form).

    Raises
    ------
    QuadratureError
        With the achieved tolerance, when the adaptive rule fails.
    """
    if gamma_s < 0:
        raise ValueError("gamma_s must be non-negative")
    scalar = np.ndim(f_p) == 0
    f = np.atleast_1d(np.asarray(f_p, dtype=float))
    if method == "closed":
        if d.q != 2.0:
            raise ValueError("closed-form susceptibility needs q = 2")
        chi = _closed_form_chi(d, f, gamma_s)
        grads = {"f_center": -chi * chi, "width": 1j * chi * chi}
    elif method == "quadrature":
        xi = (f - d.f_center) / d.width
        eta = 0.5 * gamma_s / d.width
        ncomp = 3 if derivatives else 1
        k = cauchy_transform(xi, eta, d.q, ncomp, rel_tol, tail_tol)
        chi = d.rho0 * k[0]
        grads = None
        if derivatives:
            zeta = xi + 1j * eta
            kx = k[1]
            rw = d.rho0 / d.width
            grads = {
                "f_center": -rw * kx,
                "width": -rw * (k[0] + zeta * kx),
                "q": d.rho0 * (k[2] - d.dlog_area_dq() * k[0]),
            }
    else:
        raise ValueError(f"unknown susceptibility method {method!r}")
    if scalar:
        chi = chi[0]
        if derivatives:
            grads = {key: val[0] for key, val in grads.items()}
    return (chi, grads) if derivatives else chi


def _resonator_term(p, f):
    return p.f_r - f - 0.5j * p.kappa


def _qubit_term(p, f):
    return p.g_t ** 2 / (p.f_t - f - 0.5j * p.gamma_t)


def s21_bare(p, f_p):
    """Bare resonator Lorentzian of FWHM ``kappa``."""
    f = np.asarray(f_p, dtype=float)
    return 1.0 / _resonator_term(p, f)


def s21_resonator_qubit(p, f_p):
    """Resonator coupled to the transmon only."""
    f = np.asarray(f_p, dtype=float)
    return 1.0 / (_resonator_term(p, f) - _qubit_term(p, f))


def s21_resonator_ensemble(p, f_p, chi=None, method="quadrature"):
    """Resonator coupled to the broadened spin ensemble only."""
    f = np.asarray(f_p, dtype=float)
    if chi is None:
        chi = spin_susceptibility(p.density, f, p.gamma_s, method)
    return 1.0 / (_resonator_term(p, f) - p.omega_e ** 2 * chi)


def s21_tripartite(p, f_p, chi=None, method="quadrature"):
    """Resonator coupled to both the transmon and the ensemble.

    ``chi`` may be passed in to reuse a susceptibility evaluated on the
    same grid (it does not depend on ``f_r``, ``f_t`` or the couplings).
    """
    f = np.asarray(f_p, dtype=float)
    if chi is None:
        chi = spin_susceptibility(p.density, f, p.gamma_s, method)
    return 1.0 / (_resonator_term(p, f) - _qubit_term(p, f) - p.omega_e ** 2 * chi)


MODELS = {
    "bare": s21_bare,
    "jc": s21_resonator_qubit,
    "ensemble": s21_resonator_ensemble,
    "tripartite": s21_tripartite,
}


def compute_spectrum(model, p, f_min, f_max, n_points):
    """Evaluate ``model`` (a key of :data:`MODELS`) on a uniform grid."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {sorted(MODELS)}")
    if not f_min < f_max:
        raise ValueError("need f_min < f_max")
    if n_points < 2:
        raise ValueError("need at least 2 points")
    freqs = np.linspace(f_min, f_max, int(n_points))
    s21 = MODELS[model](p, freqs)
    return Spectrum.from_s21(freqs, s21, {"model": model, "params": p.to_dict()})


def _branches(p, hyperfine):
    if hyperfine:
        h = ham.build_hyperfine(p, 1).block(1)
        res = h.basis.index((1, 0, 0, 0, 0))
    else:
        h = ham.build_single_excitation(p)
        res = 0
    sol = ham.eigendecompose(h)
    return sol.eigenvalues, sol.eigenvectors[res] ** 2


def sweep_transmon(p, f_t_values, freqs, hyperfine=False, floor=DB_FLOOR):
    """Tripartite spectra while the transmon is tuned through ``f_t_values``.

    Each column is normalised to its own maximum.  The one-excitation
    eigenfrequencies (3, or 5 with ``hyperfine``) and their resonator
    weights are returned alongside as the branch overlay.
    """
    f_t_values = np.atleast_1d(np.asarray(f_t_values, dtype=float))
    freqs = np.asarray(freqs, dtype=float)
    if f_t_values.size == 0 or freqs.size == 0:
        raise ValueError("sweep axes must be non-empty")
    chi = spin_susceptibility(p.density, freqs, p.gamma_s)
    nb = 5 if hyperfine else 3
    power = np.empty((freqs.size, f_t_values.size))
    branches = np.empty((f_t_values.size, nb))
    weights = np.empty((f_t_values.size, nb))
    for j, f_t in enumerate(f_t_values):
        pj = p.evolve(f_t=f_t)
        pw = np.abs(s21_tripartite(pj, freqs, chi)) ** 2
        power[:, j] = pw / np.max(pw)
        branches[j], weights[j] = _branches(pj, hyperfine)
    db = to_db(power, None)
    db = np.maximum(db, floor) if floor is not None else db
    return SweepGrid(f_t_values, freqs, db, branches, weights,
                     {"params": p.to_dict(), "hyperfine": bool(hyperfine)}, power)


def add_sweep_noise(grid, level, rng):
    """Per-column white noise of ``level`` on the normalised linear power."""
    power = grid.power + level * rng.standard_normal(grid.power.shape)
    db = to_db(np.clip(power, 0.0, None), DB_FLOOR) if np.any(power > 0) else grid.magnitude_db
    return SweepGrid(grid.sweep_values, grid.freqs, db, grid.branches, grid.resonator_weights,
                     dict(grid.meta, noise=level), power)


def add_noise(spectrum, level, rng):
    """Add white Gaussian noise of ``level * max(power)`` to the power trace.

    ``rng`` is a :class:`numpy.random.Generator`; the result is power-only.
    """
    power = spectrum.power / np.max(spectrum.power)
    noisy = power + level * rng.standard_normal(power.size)
    meta = dict(spectrum.meta, noise=level)
    return Spectrum.from_power(spectrum.freqs, noisy, meta)
