import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridspec import presets
from hybridspec.fitting import Peak, finite_difference_jacobian
from hybridspec.spectra import Spectrum, add_sweep_noise, sweep_transmon
from hybridspec.stepwise import (STAGE1_PARAMS, StepwiseError, fit_poles, pole_model,
                                 stepwise_estimate, track_branches)

FREQS = np.linspace(2940, 3060, 481)


@pytest.fixture(scope="module")
def sweep():
    p = presets.triple_resonance()
    return p, sweep_transmon(p, np.linspace(p.f_s - 50, p.f_s + 50, 41), FREQS)


def lines(centers):
    return [Peak(c, 1.0, 1.0) for c in centers]


def test_tracking_straight_lines():
    v = np.arange(10.0)
    peaks = [lines([100 + 2 * j, 200 - 0.5 * j]) for j in range(10)]
    tracks = track_branches(v, peaks)
    assert len(tracks) == 2
    assert sorted(len(t.points) for t in tracks) == [10, 10]


def test_tracking_bridges_missing_peaks():
    v = np.arange(10.0)
    peaks = [lines([100 + 2 * j]) if j not in (4, 5) else [] for j in range(10)]
    tracks = track_branches(v, peaks)
    assert len(tracks) == 1
    assert tracks[0].interpolated == pytest.approx({4: 108.0, 5: 110.0})


def test_tracking_missing_columns():
    v = np.delete(np.arange(12.0), [5, 6])
    peaks = [lines([100 + 2 * x]) for x in v]
    tracks = track_branches(v, peaks)
    assert len(tracks) == 1 and tracks[0].interpolated == pytest.approx({5: 110.0, 6: 112.0})
    with pytest.raises(StepwiseError):
        track_branches(np.delete(np.arange(12.0), [5, 6, 7]), [lines([1.0])] * 9)


def test_tracking_rejects_jumps():
    v = np.arange(8.0)
    peaks = [lines([100 + j]) for j in range(4)] + [lines([150 + j]) for j in range(4, 8)]
    tracks = track_branches(v, peaks)
    assert len(tracks) == 2


@settings(max_examples=30)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(6, 20))
def test_tracking_property(s1, s2, n):
    # two lines well apart never swap or merge
    v = np.arange(float(n))
    peaks = [lines([0.0 + s1 * j, 500.0 + s2 * j]) for j in range(n)]
    tracks = sorted(track_branches(v, peaks), key=lambda t: t.points[0][0])
    assert len(tracks) == 2
    assert all(abs(c - s1 * j) < 1e-9 for j, (c, _, _) in tracks[0].points.items())


def test_pole_model_jacobian():
    f = np.linspace(-10, 10, 201)
    theta = np.array([-3.0, 2.5, 1.0, 1.8, 0.7, 0.5, 0.3])
    _, jm = pole_model(f, theta, 2)
    fd = finite_difference_jacobian(lambda t: pole_model(f, t, 2)[0], theta)
    np.testing.assert_allclose(jm, fd, rtol=1e-5, atol=1e-8)


def test_fit_poles_recovers_interfering_lines():
    f = np.linspace(-10, 10, 801)
    truth = np.array([-1.5, 1.2, 1.0, 2.0, 0.6, 0.4, 0.3])
    s = Spectrum.from_power(f, pole_model(f, truth, 2)[0])
    x, w, sx, sw, res = fit_poles(s, [-1.3, 1.0], [1.2, 1.5])
    np.testing.assert_allclose(x, truth[:2], atol=1e-6)
    np.testing.assert_allclose(w, truth[2:4], atol=1e-6)


def test_stepwise_clean_round_trip(sweep):
    p, grid = sweep
    priors = p.evolve(f_r=p.f_r + 0.4, f_s=p.f_s - 0.3, gamma_t=3.0)
    res = stepwise_estimate(grid, priors)
    assert res.converged and list(res.params) == list(STAGE1_PARAMS)
    assert res.params["f_r"] == pytest.approx(p.f_r, abs=0.01)
    assert res.params["f_s"] == pytest.approx(p.f_s, abs=0.02)
    assert res.params["f_t_center"] == pytest.approx(p.f_t, abs=0.02)
    assert res.params["f_t_slope"] == pytest.approx(1.0, abs=1e-3)
    assert res.params["gamma_t"] == pytest.approx(p.gamma_t, abs=0.02)
    assert res.residual_rms < 2e-3 and res.extra["stage2_rms"] == res.residual_rms
    assert res.extra["min_bright_gap"] == pytest.approx(2 * p.omega_h, abs=0.5)
    assert set(res.fixed) == {"kappa", "g_t", "omega_e", "q", "width", "gamma_s"}


def test_stepwise_correction_reduces_bias(sweep):
    p, grid = sweep
    raw = stepwise_estimate(grid, p, correct=0)
    fixed = stepwise_estimate(grid, p)
    err = lambda r: abs(r.params["f_s"] - p.f_s) + abs(r.params["f_r"] - p.f_r)
    assert err(fixed) < err(raw)


def test_stepwise_accepts_column_lists(sweep):
    p, grid = sweep
    cols = [grid.column(j) for j in range(grid.sweep_values.size)]
    res = stepwise_estimate((grid.sweep_values, cols), p)
    assert res.params["f_r"] == pytest.approx(p.f_r, abs=0.01)


def test_stepwise_with_missing_columns(sweep):
    p, grid = sweep
    keep = [j for j in range(grid.sweep_values.size) if j not in (18, 19)]
    cols = [grid.column(j) for j in keep]
    res = stepwise_estimate((grid.sweep_values[keep], cols), p)
    assert res.params["f_s"] == pytest.approx(p.f_s, abs=0.02)
    keep = [j for j in range(grid.sweep_values.size) if j not in (18, 19, 20)]
    with pytest.raises(StepwiseError):
        stepwise_estimate((grid.sweep_values[keep], [grid.column(j) for j in keep]), p)


def test_stepwise_noisy_within_sigma(sweep):
    p, grid = sweep
    noisy = add_sweep_noise(grid, 0.02, np.random.default_rng(11))
    res = stepwise_estimate(noisy, p.evolve(f_r=p.f_r + 0.3))
    truth = {"f_r": p.f_r, "f_t_center": p.f_t, "f_t_slope": 1.0, "f_s": p.f_s,
             "gamma_t": p.gamma_t}
    for k, v in truth.items():
        assert abs(res.params[k] - v) < 4 * res.sigma[k], k


def test_stepwise_needs_columns(sweep):
    p, grid = sweep
    with pytest.raises(StepwiseError):
        stepwise_estimate((grid.sweep_values[:2], [grid.column(0), grid.column(1)]), p)
    flat = [Spectrum.from_power(FREQS, np.ones_like(FREQS)) for _ in range(5)]
    with pytest.raises(StepwiseError):
        stepwise_estimate((np.arange(5.0), flat), p)
