"""Parameter records, the q-Gaussian spin density and derived rates.

Every frequency, rate and coupling is an ordinary ``float`` in MHz in the
omega/2pi convention (hbar = 1).  Decay rates are full widths at half
maximum and enter complex detunings as ``-1j * rate / 2``.
"""
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .quadrature import qgauss_moments

__all__ = [
    "ConfigError", "DomainError", "QGaussianDensity", "SystemParams",
    "hybrid_coupling", "cooperativity", "collective_linewidth_from_polariton",
    "polariton_linewidth", "qgaussian_eval", "qgaussian_normalize",
    "qgaussian_fwhm", "width_from_fwhm", "DEFAULT_GAMMA_S",
    "DEFAULT_ANHARMONICITY", "DEFAULT_HYPERFINE_ALPHA",
]

DEFAULT_GAMMA_S = 0.001
DEFAULT_ANHARMONICITY = -203.1
DEFAULT_HYPERFINE_ALPHA = 2.2


class DomainError(ValueError):
    """Input outside the physical domain of an operation."""


class ConfigError(ValueError):
    """Malformed parameter record (unknown key, missing key, bad value)."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


def hybrid_coupling(g_t, omega_e):
    """Coupling of the bus to the bright transmon/ensemble superposition."""
    if g_t < 0 or omega_e < 0:
        raise DomainError("couplings must be non-negative")
    return math.hypot(g_t, omega_e)


def cooperativity(omega_h, kappa, gamma_te):
    """Strong-coupling figure of merit ``4 omega_h**2 / (kappa * gamma_te)``."""
    if kappa < 0 or gamma_te < 0:
        raise DomainError("rates must be non-negative")
    if kappa == 0 or gamma_te == 0:
        raise ZeroDivisionError("cooperativity undefined for a lossless mode")
    return 4.0 * omega_h ** 2 / (kappa * gamma_te)


def collective_linewidth_from_polariton(gamma_h, kappa):
    """Invert the polariton width ``gamma_h = (kappa + gamma_te) / 2`` for gamma_te."""
    if 2.0 * gamma_h < kappa:
        raise DomainError(
            f"polariton width {gamma_h} MHz is below kappa/2 = {kappa / 2} MHz")
    return 2.0 * gamma_h - kappa


def polariton_linewidth(kappa, gamma_te):
    return 0.5 * (kappa + gamma_te)


def qgaussian_fwhm(width, q):
    """Full width at half maximum of a q-Gaussian with width parameter ``width``."""
    if q == 1.0:
        return 2.0 * width * math.sqrt(math.log(2.0))
    return 2.0 * width * math.sqrt(math.expm1((q - 1.0) * math.log(2.0)) / (q - 1.0))


def width_from_fwhm(fwhm, q):
    """Width parameter of the q-Gaussian whose FWHM is ``fwhm``."""
    return fwhm / qgaussian_fwhm(1.0, q)


@dataclass(frozen=True)
class QGaussianDensity:
    """Unit-area inhomogeneous spin density.

    ``rho(f) = rho0 * [1 - (1 - q) (f - f_center)**2 / width**2] ** (1 / (1 - q))``,
    the Gaussian ``rho0 * exp(-(f - f_center)**2 / width**2)`` at ``q = 1``
    and a Lorentzian with half width ``width`` at ``q = 2``.
    """

    f_center: float
    width: float
    q: float
    rho0: float

    def __post_init__(self):
        if not (math.isfinite(self.f_center) and self.f_center > 0):
            raise DomainError("density center must be a positive finite frequency")
        if not self.width > 0:
            raise DomainError("density width must be positive")
        if not self.q < 3.0:
            raise DomainError(f"q = {self.q} >= 3 is not normalisable")
        if not self.rho0 > 0:
            raise DomainError("rho0 must be positive")

    def __call__(self, f):
        return qgaussian_eval(self, f)

    @property
    def fwhm(self):
        return qgaussian_fwhm(self.width, self.q)

    @property
    def area_unit(self):
        """``1 / (rho0 * width)``: area of the unnormalised shape in scaled units."""
        return 1.0 / (self.rho0 * self.width)

    def dlog_area_dq(self):
        area, darea = qgauss_moments(self.q)
        return darea / area


def _shape(x, q):
    x = np.asarray(x, dtype=float)
    if q == 1.0:
        return np.exp(-x * x)
    u = (q - 1.0) * x * x
    valid = u > -1.0
    return np.where(valid, np.exp(-np.log1p(np.where(valid, u, 0.0)) / (q - 1.0)), 0.0)


def qgaussian_eval(d, f):
    """Evaluate the density ``d`` at frequency (or array of frequencies) ``f``."""
    value = d.rho0 * _shape((np.asarray(f, dtype=float) - d.f_center) / d.width, d.q)
    return float(value) if np.ndim(value) == 0 else value


def qgaussian_normalize(f_center, width, q):
    """Build a unit-area :class:`QGaussianDensity` (``rho0`` by quadrature)."""
    if not width > 0:
        raise DomainError("width must be positive")
    if not q < 3.0:
        raise DomainError(f"q = {q} >= 3 is not normalisable")
    area, _ = qgauss_moments(q)
    return QGaussianDensity(float(f_center), float(width), float(q), 1.0 / (width * float(area)))


_JSON_KEYS = ("f_r", "kappa", "f_t", "gamma_t", "anharm_delta", "f_s", "gamma_s",
              "g_t", "omega_e", "q", "width", "hyperfine_alpha")
_JSON_DEFAULTS = {
    "gamma_s": DEFAULT_GAMMA_S,
    "anharm_delta": DEFAULT_ANHARMONICITY,
    "hyperfine_alpha": DEFAULT_HYPERFINE_ALPHA,
}
_FREQUENCIES = ("f_r", "f_t", "f_s")
_RATES = ("kappa", "gamma_t", "gamma_s")
_COUPLINGS = ("g_t", "omega_e")


@dataclass(frozen=True)
class SystemParams:
    """Everything needed to simulate the resonator-transmon-ensemble system."""

    f_r: float
    kappa: float
    f_t: float
    gamma_t: float
    f_s: float
    g_t: float
    omega_e: float
    density: QGaussianDensity
    gamma_s: float = DEFAULT_GAMMA_S
    anharm_delta: float = DEFAULT_ANHARMONICITY
    hyperfine_alpha: float = DEFAULT_HYPERFINE_ALPHA

    def __post_init__(self):
        for name in _FREQUENCIES:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be a positive finite frequency, got {value}")
        for name in _RATES + _COUPLINGS:
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise DomainError(f"{name} must be non-negative, got {value}")
        for name in ("anharm_delta", "hyperfine_alpha"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.density.f_center != self.f_s:
            raise DomainError("density center must equal f_s")

    @classmethod
    def build(cls, *, f_r, kappa, f_t, gamma_t, f_s, g_t, omega_e, q, width,
              gamma_s=DEFAULT_GAMMA_S, anharm_delta=DEFAULT_ANHARMONICITY,
              hyperfine_alpha=DEFAULT_HYPERFINE_ALPHA):
        density = qgaussian_normalize(float(f_s), float(width), float(q))
        return cls(f_r=float(f_r), kappa=float(kappa), f_t=float(f_t),
                   gamma_t=float(gamma_t), f_s=float(f_s), g_t=float(g_t),
                   omega_e=float(omega_e), density=density, gamma_s=float(gamma_s),
                   anharm_delta=float(anharm_delta), hyperfine_alpha=float(hyperfine_alpha))

    @property
    def q(self):
        return self.density.q

    @property
    def width(self):
        return self.density.width

    @property
    def omega_h(self):
        return hybrid_coupling(self.g_t, self.omega_e)

    def evolve(self, **changes):
        """Copy with changes; ``f_s``, ``q`` and ``width`` rebuild the density."""
        unknown = set(changes) - set(_JSON_KEYS)
        if unknown:
            raise ConfigError(f"unknown parameter(s): {sorted(unknown)}", key=sorted(unknown)[0])
        dens = {k: changes.pop(k) for k in ("q", "width") if k in changes}
        if dens or "f_s" in changes:
            f_s = float(changes.get("f_s", self.f_s))
            q = float(dens.get("q", self.q))
            width = float(dens.get("width", self.width))
            if q == self.q and width == self.width:
                density = replace(self.density, f_center=f_s)
            else:
                density = qgaussian_normalize(f_s, width, q)
            changes["density"] = density
        changes = {k: (float(v) if k != "density" else v) for k, v in changes.items()}
        return replace(self, **changes)

    def to_dict(self):
        out = {}
        for key in _JSON_KEYS:
            out[key] = float(getattr(self, key))
        return out

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("system parameters must be a JSON object")
        unknown = [k for k in data if k not in _JSON_KEYS]
        if unknown:
            raise ConfigError(f"unknown parameter key {unknown[0]!r}", key=unknown[0])
        values = dict(_JSON_DEFAULTS)
        values.update(data)
        missing = [k for k in _JSON_KEYS if k not in values]
        if missing:
            raise ConfigError(f"missing parameter key {missing[0]!r}", key=missing[0])
        for key in _JSON_KEYS:
            value = values[key]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"parameter {key!r} must be a number, got {value!r}", key=key)
        try:
            return cls.build(**values)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc


SYSTEM_KEYS = _JSON_KEYS
FIELD_NAMES = tuple(f.name for f in fields(SystemParams))
