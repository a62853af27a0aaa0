"""Two-stage parameter estimation from a transmon frequency sweep.

Stage 1 follows the resonances through the sweep and fits the complex
eigenvalues of the damped 3x3 single-excitation Hamiltonian to them,
with the couplings and ensemble shape held at prior values.  Stage 2
simulates the full tripartite sweep at the combined parameter set and
reports its residual; it never refits.

Per column, each tracked resonance is measured as a pole of a coherent
sum ``|sum_k c_k / (f - lambda_k)|^2`` rather than as an isolated
Lorentzian, so that interference between neighbouring resonances does
not shift the centres.  The ensemble is not a true pole (its density is
not Lorentzian); the resulting small offset between measured poles and
3x3 eigenvalues is estimated by running the same per-column measurement
on a noiseless simulation at the current estimate and subtracted before
refitting; two such passes are made by default.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .fitting import find_peaks, least_squares
from .hamiltonian import effective_hamiltonian
from .spectra import Spectrum, sweep_transmon

logger = logging.getLogger(__name__)

__all__ = ["StepwiseError", "Track", "track_branches", "pole_model", "fit_poles",
           "stepwise_estimate", "STAGE1_PARAMS"]

STAGE1_PARAMS = ("f_r", "f_t_center", "f_t_slope", "f_s", "gamma_t")
MAX_MISSING = 2
JUMP_FACTOR = 3.0
MIN_TRACK = 3
PROMINENCE = 0.12


class StepwiseError(RuntimeError):
    """Stage 1 could not follow enough resonances through the sweep."""


@dataclass
class Track:
    """One resonance followed across columns: ``{column: (center, fwhm, amplitude)}``."""

    points: dict = field(default_factory=dict)
    interpolated: dict = field(default_factory=dict)
    branch: int = -1

    def last(self):
        j = max(self.points)
        return j, self.points[j][0]

    def predict(self, j):
        cols = sorted(self.points)
        if len(cols) < 2:
            return self.points[cols[-1]][0]
        j1, j2 = cols[-2], cols[-1]
        x1, x2 = self.points[j1][0], self.points[j2][0]
        return x2 + (x2 - x1) * (j - j2) / (j2 - j1)


def _column_positions(sweep_values):
    """Integer column positions on the nominal sweep step; gaps become missing slots."""
    v = np.asarray(sweep_values, dtype=float)
    if v.size < 2:
        return np.zeros(v.size, dtype=int)
    steps = np.diff(v)
    step = np.median(steps)
    if not step > 0:
        raise StepwiseError("sweep values must be strictly increasing")
    pos = np.concatenate([[0], np.cumsum(np.rint(steps / step).astype(int))])
    missing = np.diff(pos) - 1
    if np.any(missing > MAX_MISSING):
        raise StepwiseError(
            f"sweep has {int(missing.max())} consecutive missing columns; "
            f"at most {MAX_MISSING} can be bridged")
    return pos


def track_branches(sweep_values, peak_lists, min_length=MIN_TRACK):
    """Follow peaks through the sweep by nearest-neighbour continuation.

    A peak joins a track when it lies within ``3x`` the median
    column-to-column drift of the track's extrapolated position.  Tracks
    bridge at most two missing columns, whose positions are filled by
    linear interpolation.
    """
    pos = _column_positions(sweep_values)
    centers = [np.array([pk.center for pk in pl]) for pl in peak_lists]
    drifts = []
    for a, b, pa, pb in zip(centers[:-1], centers[1:], pos[:-1], pos[1:]):
        if a.size and b.size:
            d = np.min(np.abs(a[:, None] - b[None, :]), axis=1) / (pb - pa)
            drifts.extend(d)
    widths = [pk.fwhm for pl in peak_lists for pk in pl]
    floor = 0.05 * (np.median(widths) if widths else 1.0)
    max_jump = JUMP_FACTOR * max(float(np.median(drifts)) if drifts else 0.0, floor)

    active, done = [], []
    for j, peaks in enumerate(peak_lists):
        here = pos[j]
        still = []
        for tr in active:
            last_pos = pos[max(tr.points)]
            if here - last_pos - 1 > MAX_MISSING:
                done.append(tr)
            else:
                still.append(tr)
        active = still
        pairs = []
        for ti, tr in enumerate(active):
            gap = here - pos[max(tr.points)]
            guess = tr.predict(j)
            for pi, pk in enumerate(peaks):
                dist = abs(pk.center - guess)
                if dist <= max_jump * gap:
                    pairs.append((dist, ti, pi))
        used_t, used_p = set(), set()
        for dist, ti, pi in sorted(pairs):
            if ti in used_t or pi in used_p:
                continue
            used_t.add(ti)
            used_p.add(pi)
            pk = peaks[pi]
            active[ti].points[j] = (pk.center, pk.fwhm, pk.amplitude)
        for pi, pk in enumerate(peaks):
            if pi not in used_p:
                active.append(Track({j: (pk.center, pk.fwhm, pk.amplitude)}))
    done.extend(active)

    tracks = [tr for tr in done if len(tr.points) >= min_length]
    for tr in tracks:
        cols = sorted(tr.points)
        for j1, j2 in zip(cols[:-1], cols[1:]):
            slots = pos[j2] - pos[j1]
            for s in range(1, slots):
                x = tr.points[j1][0] + (tr.points[j2][0] - tr.points[j1][0]) * s / slots
                tr.interpolated[pos[j1] + s] = x
    return tracks


def pole_model(freqs, theta, n):
    """``|sum_k c_k / (f - lambda_k)|^2`` and its Jacobian.

    ``theta`` packs ``n`` centres, ``n`` FWHMs (``lambda = x - i w/2``),
    ``n`` real residue parts and ``n - 1`` imaginary parts (the first
    residue is real: the overall phase is unobservable).
    """
    f = np.asarray(freqs, dtype=float)[:, None]
    x, w, a = theta[:n], theta[n:2 * n], theta[2 * n:3 * n]
    b = np.concatenate([[0.0], theta[3 * n:]])
    c = a + 1j * b
    inv = 1.0 / (f - (x - 0.5j * w))
    g = inv @ c
    power = np.abs(g) ** 2
    cg = 2.0 * np.conj(g)[:, None]
    t2 = c * inv * inv
    jm = np.concatenate([
        np.real(cg * t2),
        np.real(cg * (-0.5j) * t2),
        np.real(cg * inv),
        np.real(cg * 1j * inv[:, 1:]),
    ], axis=1)
    return power, jm


def fit_poles(s, centers, fwhms, amplitudes=None, init=None):
    """Fit coherent poles to one normalised column.

    Returns ``(centers, fwhms, sigma_centers, sigma_fwhms, result)``.
    ``init`` (a full parameter vector) overrides the peak-based start.
    """
    n = len(centers)
    f = s.freqs
    y = s.power / np.max(s.power)
    if init is None:
        amps = np.ones(n) if amplitudes is None else np.asarray(amplitudes, dtype=float)
        theta = np.concatenate([centers, fwhms, np.sqrt(np.clip(amps, 1e-6, None))
                                * 0.5 * np.asarray(fwhms), np.zeros(n - 1)])
    else:
        theta = np.asarray(init, dtype=float)
    step = np.median(np.diff(f))
    lo = np.concatenate([np.full(n, f[0]), np.full(n, 0.1 * step), np.full(2 * n - 1, -np.inf)])
    hi = np.concatenate([np.full(n, f[-1]), np.full(n, f[-1] - f[0]), np.full(2 * n - 1, np.inf)])
    theta = np.clip(theta, lo, hi)
    res = least_squares(lambda t: pole_model(f, t, n), y, theta, (lo, hi), jac=True,
                        label="poles")
    v = np.array(list(res.params.values()))
    sg = np.array(list(res.sigma.values()))
    return v[:n], v[n:2 * n], sg[:n], sg[n:2 * n], res


def _eig_sorted(h):
    w, v = np.linalg.eig(h)
    order = np.argsort(w.real, kind="stable")
    return w[order], v[:, order]


def _stage1_model(priors, sweep, gamma_ens, obs_cols, obs_branch, offset):
    center = float(np.mean(sweep))

    def model(theta):
        f_r, ft_c, ft_s, f_s, gamma_t = theta
        n_obs = obs_cols.size
        pred = np.empty(2 * n_obs)
        jm = np.zeros((2 * n_obs, 5))
        cache = {}
        for k, (j, b) in enumerate(zip(obs_cols, obs_branch)):
            if j not in cache:
                p = priors.evolve(f_r=f_r, f_t=ft_c + ft_s * (sweep[j] - center), f_s=f_s,
                                  gamma_t=gamma_t)
                cache[j] = _eig_sorted(effective_hamiltonian(p, gamma_ens))
            w, v = cache[j]
            lam = w[b]
            vec = v[:, b]
            norm = vec @ vec
            d0, d1, d2 = vec[0] ** 2 / norm, vec[1] ** 2 / norm, vec[2] ** 2 / norm
            dl = np.array([d0, d1, d1 * (sweep[j] - center), d2, -0.5j * d1])
            pred[k] = lam.real
            pred[n_obs + k] = -2.0 * lam.imag
            jm[k] = dl.real
            jm[n_obs + k] = -2.0 * dl.imag
        return pred + offset, jm

    return model


def _measure(sweep, columns, per_column, starts=None):
    """Pole measurements for every column in ``per_column``.

    ``per_column[j]`` lists ``(branch, center, fwhm, amplitude)``.
    Returns observation arrays and the fitted parameter vectors.
    """
    cols, branch, x, w, sx, sw = [], [], [], [], [], []
    thetas = {}
    for j in columns:
        items = per_column[j]
        col = sweep[j]
        init = None if starts is None else starts[j]
        xs, ws, sxs, sws, res = fit_poles(col, [it[1] for it in items], [it[2] for it in items],
                                          [it[3] for it in items], init=init)
        thetas[j] = np.array(list(res.params.values()))
        for (b, *_), xi, wi, si, ti in zip(items, xs, ws, sxs, sws):
            cols.append(j)
            branch.append(b)
            x.append(xi)
            w.append(wi)
            sx.append(si)
            sw.append(ti)
    return (np.array(cols), np.array(branch), np.array(x), np.array(w),
            np.array(sx), np.array(sw), thetas)


def _columns(sweep):
    """Linear-power column spectra and sweep values, dropping empty columns."""
    if isinstance(sweep, tuple):
        values, cols = sweep
        return np.asarray(values, dtype=float), list(cols)
    values, cols = [], []
    for j, v in enumerate(sweep.sweep_values):
        power = sweep.column_power(j)
        keep = np.isfinite(power)
        if np.count_nonzero(keep) < 3:
            continue
        values.append(v)
        cols.append(Spectrum.from_power(sweep.freqs[keep], power[keep], {"f_t": float(v)}))
    return np.array(values), cols


def stepwise_estimate(sweep, priors, prominence=PROMINENCE, correct=2):
    """Estimate ``f_r``, the transmon tuning and ``f_s``, ``gamma_t`` from a sweep.

    Parameters
    ----------
    sweep : SweepGrid or (sweep_values, list of Spectrum)
        Measured transmission with the transmon swept through resonance;
        ``sweep_values`` are the nominal transmon frequencies.
    priors : SystemParams
        Starting point; ``g_t``, ``omega_e``, ``kappa``, ``gamma_s`` and
        the ensemble shape are held at these values.
    prominence : float
        Minimum peak prominence (normalised power) for tracking.
    correct : int
        Number of simulation-based offset corrections; 0 disables them.

    Returns
    -------
    FitResult
        ``params`` holds the stage-1 estimates with the transmon frequency
        modelled as ``f_t_center + f_t_slope * (v - mean(v))``;
        ``residual_rms`` is the stage-2 simulation residual.
    """
    values, cols = _columns(sweep)
    if len(cols) < 3:
        raise StepwiseError("need at least three sweep columns")
    center = float(np.mean(values))
    peak_lists = [find_peaks(c, prominence) for c in cols]
    tracks = track_branches(values, peak_lists)
    if len(tracks) < 2:
        raise StepwiseError(f"only {len(tracks)} branch(es) could be tracked; need 2")

    # label tracks by the branch (ascending real part) predicted from the priors
    gamma_ens = priors.density.fwhm + priors.gamma_s
    prior_eigs = [_eig_sorted(effective_hamiltonian(priors.evolve(f_t=v), gamma_ens))[0].real
                  for v in values]
    for tr in tracks:
        votes = [int(np.argmin(np.abs(prior_eigs[j] - pt[0]))) for j, pt in tr.points.items()]
        tr.branch = int(np.bincount(votes).argmax())
    per_column = {}
    for tr in sorted(tracks, key=lambda t: -len(t.points)):
        for j, (c, wd, amp) in tr.points.items():
            slot = per_column.setdefault(j, {})
            if tr.branch not in slot:
                slot[tr.branch] = (tr.branch, c, wd, amp)
    per_column = {j: sorted(s.values()) for j, s in per_column.items()}
    branches_seen = {b for s in per_column.values() for b, *_ in s}
    if len(branches_seen) < 2:
        raise StepwiseError("tracked resonances map onto fewer than two branches")
    columns = sorted(per_column)
    logger.debug("%d tracks over %d columns, branches %s", len(tracks), len(columns),
                 sorted(branches_seen))

    obs_cols, obs_b, x, w, sx, sw, thetas = _measure(cols, columns, per_column)
    good = np.isfinite(sx) & np.isfinite(sw) & (sx > 0) & (sw > 0)
    y = np.concatenate([x[good], w[good]])
    sig = np.concatenate([sx[good], sw[good]])
    oc, ob = obs_cols[good], obs_b[good]

    theta0 = np.array([priors.f_r, center, 1.0, priors.f_s, priors.gamma_t])
    lo = np.array([-np.inf, -np.inf, 0.0, -np.inf, 1e-6])
    hi = np.full(5, np.inf)

    def run(offset):
        model = _stage1_model(priors, values, gamma_ens, oc, ob, offset)
        return least_squares(model, y, theta0, (lo, hi), jac=True, names=list(STAGE1_PARAMS),
                             weights=sig, label="stepwise")

    res = run(0.0)
    offset = np.zeros_like(y)
    model0 = _stage1_model(priors, values, gamma_ens, oc, ob, 0.0)
    for _ in range(int(correct)):
        est = _combined(priors, res.params, values, center)
        clean = _simulate_columns(est, cols)
        _, _, xc, wc, _, _, _ = _measure(clean, columns, per_column, starts=thetas)
        pred0, _ = model0(np.array([res.params[k] for k in STAGE1_PARAMS]))
        offset = np.concatenate([xc[good], wc[good]]) - pred0
        res = run(offset)

    combined = _combined(priors, res.params, values, center)
    stage2 = _simulate_columns(combined, cols)
    num = sum(float(np.sum((c.power / np.max(c.power) - s.power / np.max(s.power)) ** 2))
              for c, s in zip(cols, stage2))
    npts = sum(len(c) for c in cols)
    stage1_rms = res.residual_rms
    res.residual_rms = math.sqrt(num / npts)
    res.fixed = {k: float(v) for k, v in priors.to_dict().items()
                 if k in ("kappa", "g_t", "omega_e", "q", "width", "gamma_s")}
    upper = [b for b in branches_seen]
    gaps = []
    for j, items in per_column.items():
        bs = {b: c for b, c, *_ in items}
        if min(upper) in bs and max(upper) in bs and max(upper) - min(upper) == 2:
            gaps.append(bs[max(upper)] - bs[min(upper)])
    res.extra = {
        "stage1_rms": stage1_rms,
        "stage2_rms": res.residual_rms,
        "n_tracks": len(tracks),
        "n_observations": int(oc.size),
        "min_bright_gap": float(min(gaps)) if gaps else float("nan"),
        "omega_h_prior": priors.omega_h,
        "gamma_ens": gamma_ens,
        "sweep_center": center,
    }
    res.extra_tracks = tracks
    return res


def _combined(priors, params, values, center):
    """Priors updated with stage-1 values and the per-column transmon frequencies."""
    p = priors.evolve(f_r=params["f_r"], f_s=params["f_s"], gamma_t=params["gamma_t"],
                      f_t=params["f_t_center"])
    return p, params["f_t_center"] + params["f_t_slope"] * (values - center)


def _simulate_columns(est, cols):
    """Noiseless tripartite columns on the measured probe grids."""
    p, f_t = est
    freqs = cols[0].freqs
    if all(np.array_equal(c.freqs, freqs) for c in cols):
        grid = sweep_transmon(p, f_t, freqs)
        return [Spectrum.from_power(freqs, grid.power[:, j]) for j in range(f_t.size)]
    return [Spectrum.from_power(c.freqs, sweep_transmon(p, [v], c.freqs).power[:, 0])
            for v, c in zip(f_t, cols)]
