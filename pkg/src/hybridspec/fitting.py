"""Least-squares driver, peak finding and model fits on |S21|^2 traces.

Every fit works on linear power normalised to a maximum of 1; an overall
``scale`` parameter absorbs the unknown gain.  Uncertainties are the
linearised ones, ``pinv(J^T J)`` times the residual variance.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .params import qgaussian_fwhm, qgaussian_normalize
from .spectra import Spectrum, spin_susceptibility

logger = logging.getLogger(__name__)

__all__ = [
    "FitResult", "Peak", "least_squares", "finite_difference_jacobian", "find_peaks",
    "fit_lorentzians", "fit_jc", "fit_ensemble", "lorentzian_model", "jc_model",
    "ensemble_model", "smooth", "JC_PARAMS", "ENSEMBLE_PARAMS",
]

LAMBDA0 = 1e-3
LAMBDA_DOWN = 0.5
LAMBDA_UP = 4.0
LAMBDA_MAX = 1e16
FTOL = 1e-10
GTOL = 1e-8
MAX_ITER = 500
RANK_TOL = 1e-10


@dataclass
class FitResult:
    """Outcome of a least-squares fit.

    ``sigma`` is ``inf`` for parameters the data cannot resolve and absent
    for parameters held fixed.
    """

    params: dict
    sigma: dict
    residual_rms: float
    n_iterations: int
    converged: bool
    model: str = ""
    cost_history: list = field(default_factory=list)
    gradient_norm: float = float("nan")
    covariance: np.ndarray = None
    at_bounds: list = field(default_factory=list)
    unresolved: list = field(default_factory=list)
    fixed: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_json_dict(self):
        def clean(v):
            v = float(v)
            return v if math.isfinite(v) else None
        out = {
            "model": self.model,
            "params": {k: clean(v) for k, v in self.params.items()},
            "sigma": {k: clean(v) for k, v in self.sigma.items()},
            "residual_rms": clean(self.residual_rms),
            "converged": bool(self.converged),
        }
        if self.extra:
            out["derived"] = {k: clean(v) for k, v in self.extra.items()
                              if isinstance(v, (int, float))}
        return out


@dataclass(frozen=True)
class Peak:
    center: float
    fwhm: float
    amplitude: float
    prominence: float = float("nan")


def finite_difference_jacobian(fun, theta, rel_step=1e-6, scale=None):
    """Central differences with step ``rel_step * scale`` per parameter."""
    theta = np.asarray(theta, dtype=float)
    if scale is None:
        scale = np.maximum(np.abs(theta), 1.0)
    cols = []
    for i in range(theta.size):
        h = rel_step * scale[i]
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        cols.append((np.asarray(fun(tp)) - np.asarray(fun(tm))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def _covariance(jac, s2, names):
    """Covariance and unresolvable parameters from a possibly singular J."""
    k = jac.shape[1]
    norms = np.linalg.norm(jac, axis=0)
    dead = norms == 0
    safe = np.where(dead, 1.0, norms)
    js = jac / safe
    _, sv, vt = np.linalg.svd(js, full_matrices=False)
    null = sv <= RANK_TOL * (sv[0] if sv.size else 1.0)
    flagged = dead.copy()
    if np.any(null):
        flagged |= np.any(np.abs(vt[null]) > 1e-6, axis=0)
    cov = np.full((k, k), np.nan)
    ok = ~flagged
    if np.any(ok):
        sub = js[:, ok]
        inner = np.linalg.pinv(sub.T @ sub, rcond=RANK_TOL ** 2)
        inner = inner / np.outer(norms[ok], norms[ok])
        cov[np.ix_(ok, ok)] = s2 * inner
    sigma = np.where(flagged, np.inf, np.sqrt(np.clip(np.diag(np.nan_to_num(cov)), 0.0, None)))
    return cov, sigma, [names[i] for i in np.nonzero(flagged)[0]]


def least_squares(model, data, init, bounds=None, jac=None, names=None, weights=None,
                  max_iter=MAX_ITER, ftol=FTOL, gtol=GTOL, label=""):
    """Levenberg-Marquardt fit of ``model(theta)`` to ``data``.

    Parameters
    ----------
    model : callable
        ``model(theta) -> prediction``; with ``jac=True`` it returns
        ``(prediction, dprediction/dtheta)``.
    data : Spectrum or array_like
        Target values (``Spectrum.power`` for a trace).
    init : array_like
        Starting point; must lie within ``bounds``.
    bounds : (lower, upper), optional
        Box constraints, enforced by projecting each step.
    jac : callable, True or None
        Jacobian of the prediction.  ``None`` uses central differences.
    weights : array_like, optional
        Per-point standard deviations; residuals are divided by them.

    Returns
    -------
    FitResult
    """
    y = data.power if isinstance(data, Spectrum) else np.asarray(data, dtype=float)
    if y.size == 0:
        raise ValueError("no data to fit")
    theta = np.asarray(init, dtype=float).copy()
    k = theta.size
    names = list(names) if names is not None else [f"p{i}" for i in range(k)]
    lo, hi = (np.full(k, -np.inf), np.full(k, np.inf)) if bounds is None else (
        np.asarray(bounds[0], dtype=float), np.asarray(bounds[1], dtype=float))
    if np.any(theta < lo) or np.any(theta > hi):
        raise ValueError("initial point outside bounds")
    w = None if weights is None else 1.0 / np.asarray(weights, dtype=float)

    def evaluate(t, need_jac):
        if jac is True:
            pred, jm = model(t)
        else:
            pred = np.asarray(model(t), dtype=float)
            jm = None
            if need_jac:
                jm = jac(t) if callable(jac) else finite_difference_jacobian(model, t)
        r = y - np.asarray(pred, dtype=float)
        if w is not None:
            r = r * w
            if jm is not None:
                jm = jm * w[:, None]
        return r, jm

    r, jm = evaluate(theta, True)
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = LAMBDA0
    converged = False
    it = 0
    grad = jm.T @ r
    while it < max_iter:
        it += 1
        if np.max(np.abs(grad)) < gtol:
            converged = True
            break
        jtj = jm.T @ jm
        diag = np.diag(jtj).copy()
        diag[diag <= 0] = max(np.max(diag), 1.0) * 1e-12
        accepted = False
        while lam <= LAMBDA_MAX:
            a = jtj + lam * np.diag(diag)
            try:
                step = np.linalg.solve(a, grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(a, grad, rcond=None)[0]
            trial = np.clip(theta + step, lo, hi)
            if np.array_equal(trial, theta):
                break
            try:
                r_new, jm_new = evaluate(trial, False)
            except (ArithmeticError, ValueError) as exc:
                logger.debug("trial step rejected: %s", exc)
                lam *= LAMBDA_UP
                continue
            cost_new = 0.5 * float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new < cost:
                accepted = True
                break
            lam *= LAMBDA_UP
        if not accepted:
            # no descent left at any damping: numerical minimum
            converged = True
            break
        decrease = (cost - cost_new) / cost if cost > 0 else 0.0
        if jm_new is None:
            jm_new = evaluate(trial, True)[1]
        theta, r, jm, cost = trial, r_new, jm_new, cost_new
        grad = jm.T @ r
        history.append(cost)
        lam = max(lam * LAMBDA_DOWN, 1e-12)
        if decrease < ftol:
            converged = True
            break

    n = y.size
    dof = max(n - k, 1)
    s2 = 2.0 * cost / dof
    cov, sigma, unresolved = _covariance(jm, s2, names)
    span = np.maximum(np.abs(theta), 1.0) * 1e-9
    at_bounds = [names[i] for i in range(k)
                 if theta[i] - lo[i] <= span[i] or hi[i] - theta[i] <= span[i]]
    return FitResult(
        params=dict(zip(names, map(float, theta))),
        sigma=dict(zip(names, map(float, sigma))),
        residual_rms=math.sqrt(2.0 * cost / n),
        n_iterations=it,
        converged=converged,
        model=label,
        cost_history=history,
        gradient_norm=float(np.max(np.abs(grad))),
        covariance=cov,
        at_bounds=at_bounds,
        unresolved=unresolved,
    )


# ---------------------------------------------------------------- peaks

def _crossing(f, p, i, stop, half, direction):
    """Interpolated frequency where ``p`` falls below ``half`` walking from ``i``."""
    j = i
    while j != stop:
        n = j + direction
        if p[n] < half:
            t = (p[j] - half) / (p[j] - p[n])
            return f[j] + t * (f[n] - f[j])
        j = n
    return None


def find_peaks(s, min_prominence=0.05):
    """Local maxima of the normalised power with prominence above ``min_prominence``.

    Centres are refined by a parabola through the three top samples;
    widths come from interpolated half-maximum crossings (one-sided widths
    are doubled when the other side merges into a neighbour).
    """
    if not 0.0 < min_prominence <= 1.0:
        raise ValueError("min_prominence must lie in (0, 1]")
    f = s.freqs
    peak = np.max(s.power)
    if not peak > 0 or f.size < 3:
        return []
    p = s.power / peak
    idx, props = signal.find_peaks(p, prominence=min_prominence)
    peaks = []
    for n, i in enumerate(idx):
        center, height = f[i], p[i]
        if 0 < i < f.size - 1:
            y0, y1, y2 = p[i - 1], p[i], p[i + 1]
            denom = y0 - 2.0 * y1 + y2
            if denom < 0:
                off = 0.5 * (y0 - y2) / denom
                step = 0.5 * (f[i + 1] - f[i - 1])
                center = f[i] + off * step
                height = y1 - 0.25 * (y0 - y2) * off
        half = 0.5 * height
        left_stop = idx[n - 1] if n > 0 else 0
        right_stop = idx[n + 1] if n + 1 < idx.size else f.size - 1
        left = _crossing(f, p, i, left_stop, half, -1)
        right = _crossing(f, p, i, right_stop, half, +1)
        if left is not None and right is not None:
            fwhm = right - left
        elif left is not None:
            fwhm = 2.0 * (center - left)
        elif right is not None:
            fwhm = 2.0 * (right - center)
        else:
            continue
        if fwhm > 0:
            peaks.append(Peak(float(center), float(fwhm), float(height * peak),
                              float(props["prominences"][n])))
    return peaks


def smooth(power, window=11, order=3):
    """Savitzky-Golay smoothing, for display curves only."""
    window = min(window, len(power) - (1 - len(power) % 2))
    if window <= order:
        return np.asarray(power, dtype=float).copy()
    return signal.savgol_filter(power, window, order)


# ---------------------------------------------------------------- Lorentzians

def lorentzian_model(freqs, theta):
    """Sum of Lorentzians ``A (G/2)^2 / ((f - c)^2 + (G/2)^2)`` and its Jacobian.

    ``theta`` is ``(c_1, G_1, A_1, c_2, ...)``.
    """
    f = np.asarray(freqs, dtype=float)[:, None]
    c, g, a = theta[0::3], theta[1::3], theta[2::3]
    hw2 = 0.25 * g * g
    den = (f - c) ** 2 + hw2
    shape = hw2 / den
    pred = shape @ a
    jm = np.empty((f.shape[0], theta.size))
    jm[:, 0::3] = a * 2.0 * (f - c) * hw2 / den ** 2
    jm[:, 1::3] = a * 0.5 * g * (f - c) ** 2 / den ** 2
    jm[:, 2::3] = shape
    return pred, jm


def fit_lorentzians(s, n_peaks, min_prominence=0.02):
    """Fit ``n_peaks`` Lorentzians to the normalised power of ``s``."""
    if n_peaks < 1:
        raise ValueError("n_peaks must be >= 1")
    f = s.freqs
    y = s.power / np.max(s.power)
    found = sorted(find_peaks(Spectrum.from_power(f, y), min_prominence),
                   key=lambda pk: -pk.prominence)[:n_peaks]
    step = np.median(np.diff(f))
    theta = []
    for pk in found:
        theta += [pk.center, max(pk.fwhm, 2.0 * step), max(pk.amplitude, 1e-6)]
    while len(theta) < 3 * n_peaks:
        # surplus peak seeded where the current model misses most
        pred = lorentzian_model(f, np.array(theta))[0] if theta else np.zeros_like(y)
        j = int(np.argmax(y - pred))
        theta += [f[j], 4.0 * step, max(y[j] - pred[j], 1e-3)]
    theta = np.array(theta)
    order = np.argsort(theta[0::3])
    theta = theta.reshape(-1, 3)[order].ravel()
    span = f[-1] - f[0]
    lo = np.tile([f[0], 1e-3 * step, 0.0], n_peaks)
    hi = np.tile([f[-1], 2.0 * span, np.inf], n_peaks)
    names = [f"{key}_{i + 1}" for i in range(n_peaks) for key in ("center", "fwhm", "amplitude")]
    res = least_squares(lambda t: lorentzian_model(f, t), y, theta, (lo, hi), jac=True,
                        names=names, label="lorentzian")
    return res


# ---------------------------------------------------------------- JC

JC_PARAMS = ("f_r", "f_t", "g_t", "gamma_t", "kappa", "scale")


def jc_model(freqs, values):
    """``scale * |S21|^2`` of the resonator-qubit model and its Jacobian.

    ``values`` maps each name in :data:`JC_PARAMS` to a number; Jacobian
    columns follow the same order.
    """
    f = np.asarray(freqs, dtype=float)
    f_r, f_t, g, gamma_t, kappa, scale = (values[k] for k in JC_PARAMS)
    dt = f_t - f - 0.5j * gamma_t
    d = f_r - f - 0.5j * kappa - g * g / dt
    s = 1.0 / d
    power = np.abs(s) ** 2
    dd = np.stack([
        np.ones_like(dt),
        g * g / dt ** 2,
        -2.0 * g / dt,
        -0.5j * g * g / dt ** 2,
        np.full_like(dt, -0.5j),
    ], axis=-1)
    # dP/dD = -2 Re(conj(s) s^2 dD) = -2 Re(|s|^2 s dD)
    jm = -2.0 * scale * np.real((power * s)[:, None] * dd)
    jm = np.concatenate([jm, power[:, None]], axis=1)
    return scale * power, jm


def _values_of(p):
    return {"f_r": p.f_r, "f_t": p.f_t, "g_t": p.g_t, "gamma_t": p.gamma_t,
            "kappa": p.kappa, "f_s": p.f_s, "omega_e": p.omega_e,
            "width": p.width, "q": p.q}


def _bounds(name, f):
    lo_f, hi_f = (f[0] - (f[-1] - f[0]), f[-1] + (f[-1] - f[0])) if f is not None else (0, np.inf)
    table = {
        "f_r": (lo_f, hi_f), "f_t": (lo_f, hi_f), "f_s": (lo_f, hi_f),
        "g_t": (0.0, np.inf), "omega_e": (0.0, np.inf), "gamma_t": (1e-6, np.inf),
        "kappa": (1e-6, np.inf), "width": (1e-6, np.inf), "q": (1.0, 3.0 - 1e-6),
        "scale": (0.0, np.inf),
    }
    return table[name]


def _fit_model(label, all_names, model, s, init_values, free, extra_fixed=None):
    f = s.freqs
    y = s.power / np.max(s.power)
    free = [n for n in all_names if n in free]
    fixed = {n: init_values[n] for n in all_names if n not in free}
    if extra_fixed:
        fixed.update(extra_fixed)
    cols = [all_names.index(n) for n in free]
    theta0 = np.array([init_values[n] for n in free], dtype=float)
    lo = np.array([_bounds(n, f)[0] for n in free])
    hi = np.array([_bounds(n, f)[1] for n in free])
    theta0 = np.clip(theta0, lo, hi)

    def fun(theta):
        vals = dict(fixed)
        vals.update(zip(free, theta))
        pred, jm = model(f, vals)
        return pred, jm[:, cols]

    res = least_squares(fun, y, theta0, (lo, hi), jac=True, names=free, label=label)
    res.fixed = {n: float(v) for n, v in fixed.items() if n in all_names}
    return res


def _initial_scale(model, s, values):
    """Least-squares optimal gain for the starting parameters."""
    y = s.power / np.max(s.power)
    pred = model(s.freqs, dict(values, scale=1.0))[0]
    denom = float(pred @ pred)
    return float(pred @ y) / denom if denom > 0 else 1.0


def fit_jc(s, init, fixed=("kappa",)):
    """Fit the resonator-qubit model to a trace covering both polaritons.

    ``init`` is a :class:`SystemParams` supplying starting values (and the
    values of fixed parameters).  Free by default: ``f_r, f_t, g_t,
    gamma_t, scale``.
    """
    values = {k: v for k, v in _values_of(init).items() if k in JC_PARAMS}
    values["scale"] = _initial_scale(jc_model, s, values)
    free = [n for n in JC_PARAMS if n not in set(fixed)]
    return _fit_model("jc", list(JC_PARAMS), jc_model, s, values, free)


# ---------------------------------------------------------------- ensemble

ENSEMBLE_PARAMS = ("f_r", "f_s", "omega_e", "width", "q", "kappa", "scale")


def ensemble_model(freqs, values, gamma_s, method=None):
    """``scale * |S21|^2`` of the resonator-ensemble model and its Jacobian.

    ``method`` defaults to the closed-form Lorentzian transform when
    ``q == 2`` and quadrature otherwise; the ``q`` column is zero for the
    closed form (``q`` must then be held fixed).
    """
    f = np.asarray(freqs, dtype=float)
    f_r, f_s, om, width, q, kappa, scale = (values[k] for k in ENSEMBLE_PARAMS)
    if method is None:
        method = "closed" if q == 2.0 else "quadrature"
    d = qgaussian_normalize(f_s, width, q)
    chi, dchi = spin_susceptibility(d, f, gamma_s, method=method, derivatives=True)
    den = f_r - f - 0.5j * kappa - om * om * chi
    s = 1.0 / den
    power = np.abs(s) ** 2
    zero = np.zeros_like(chi)
    dd = np.stack([
        np.ones_like(chi),
        -om * om * dchi["f_center"],
        -2.0 * om * chi,
        -om * om * dchi["width"],
        -om * om * dchi.get("q", zero),
        np.full_like(chi, -0.5j),
    ], axis=-1)
    jm = -2.0 * scale * np.real((power * s)[:, None] * dd)
    jm = np.concatenate([jm, power[:, None]], axis=1)
    return scale * power, jm


def fit_ensemble(s, init, fixed=("kappa",), method=None):
    """Fit the resonator-ensemble model; ``gamma_s`` is always held at ``init``'s.

    Free by default: ``f_r, f_s, omega_e, width, q, scale``.  Holding
    ``q`` at 2 switches to the closed-form susceptibility.
    """
    values = {k: v for k, v in _values_of(init).items() if k in ENSEMBLE_PARAMS}
    gamma_s = init.gamma_s

    def model(freqs, vals):
        return ensemble_model(freqs, vals, gamma_s, method)

    values["scale"] = _initial_scale(model, s, values)
    free = [n for n in ENSEMBLE_PARAMS if n not in set(fixed)]
    res = _fit_model("ensemble", list(ENSEMBLE_PARAMS), model, s, values, free)
    all_vals = dict(res.fixed, **res.params)
    res.extra["fwhm"] = qgaussian_fwhm(all_vals["width"], all_vals["q"])
    res.extra["gamma_s"] = gamma_s
    return res
