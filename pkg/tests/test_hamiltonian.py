import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import ldl

from hybridspec import hamiltonian as ham
from hybridspec import presets
from hybridspec.hamiltonian import (EigenConvergenceError, ResourceLimitError, build_hyperfine,
                                    build_single_excitation, eigendecompose, enumerate_basis,
                                    jacobi_eigh)


def count_below(a, x):
    """Sylvester inertia: number of eigenvalues of ``a`` below ``x``."""
    _, d, _ = ldl(a - x * np.eye(len(a)))
    w = np.linalg.eigvalsh(d)  # d is block diagonal with 1x1 / 2x2 blocks
    return int(np.count_nonzero(w < 0))


def bisection_eigenvalues(a, tol=1e-12):
    """Eigenvalues by bisection on the inertia count (independent of any eigensolver)."""
    n = len(a)
    r = np.max(np.sum(np.abs(a), axis=1))  # Gershgorin bound
    out = []
    for k in range(n):
        lo, hi = -r - 1.0, r + 1.0
        while hi - lo > tol * max(1.0, r):
            mid = 0.5 * (lo + hi)
            if count_below(a, mid) > k:
                hi = mid
            else:
                lo = mid
        out.append(0.5 * (lo + hi))
    return np.array(out)


symmetric = arrays(np.float64, (5, 5), elements=st.floats(-10, 10)).map(lambda m: m + m.T)


def test_basis_sizes_and_order():
    b1 = enumerate_basis(5, 1)
    b2 = enumerate_basis(5, 2)
    assert len(b1) == 6 and len(b2) == 21
    assert b1.states[0] == (0, 0, 0, 0, 0)
    assert b1.states[1:] == ((1, 0, 0, 0, 0), (0, 1, 0, 0, 0), (0, 0, 1, 0, 0),
                             (0, 0, 0, 1, 0), (0, 0, 0, 0, 1))
    assert list(b2.excitations()) == [0] + [1] * 5 + [2] * 15
    assert b2.index((0, 2, 0, 0, 0)) == 6 + 5


def test_basis_limits():
    with pytest.raises(ResourceLimitError):
        enumerate_basis(40, 6)
    with pytest.raises(ValueError):
        enumerate_basis(0, 1)


@given(st.integers(1, 6), st.integers(0, 4))
def test_basis_counting(m, n):
    b = enumerate_basis(m, n)
    assert len(b) == math.comb(m + n, n)
    assert len(set(b.states)) == len(b)


def test_jacobi_against_bisection():
    rng = np.random.default_rng(7)
    for n in (1, 2, 3, 6, 10, 21):
        m = rng.normal(size=(n, n))
        a = m + m.T
        w, v = jacobi_eigh(a)
        np.testing.assert_allclose(w, bisection_eigenvalues(a), atol=1e-9)
        np.testing.assert_allclose(a @ v, v * w, atol=1e-11)
        np.testing.assert_allclose(v.T @ v, np.eye(n), atol=1e-12)


@settings(max_examples=50)
@given(symmetric)
def test_jacobi_properties(a):
    w, v = jacobi_eigh(a)
    scale = max(1.0, np.max(np.abs(a)))
    assert np.all(np.diff(w) >= 0)
    np.testing.assert_allclose(v.T @ v, np.eye(5), atol=1e-12)
    np.testing.assert_allclose(a @ v - v * w, 0.0, atol=1e-11 * scale)
    assert np.sum(w) == pytest.approx(np.trace(a), abs=1e-10 * scale)
    for k in range(5):
        col = v[:, k]
        assert col[np.argmax(np.abs(col))] > 0


def test_jacobi_degenerate_and_diagonal():
    w, v = jacobi_eigh(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_array_equal(w, [1.0, 2.0, 3.0])
    w, _ = jacobi_eigh(np.ones((4, 4)))
    np.testing.assert_allclose(w, [0, 0, 0, 4], atol=1e-13)


def test_jacobi_sweep_limit():
    a = np.random.default_rng(1).normal(size=(8, 8))
    with pytest.raises(EigenConvergenceError):
        jacobi_eigh(a + a.T, max_sweeps=1)


def test_hamiltonian_checks_symmetry():
    b = enumerate_basis(2, 1)
    with pytest.raises(ValueError):
        ham.HamiltonianMatrix(b, np.arange(9.0).reshape(3, 3))
    with pytest.raises(ValueError):
        eigendecompose(np.array([[0.0, 1.0], [2.0, 0.0]]))


def test_single_excitation_triple_resonance(triple):
    sol = eigendecompose(build_single_excitation(triple))
    oh = triple.omega_h
    np.testing.assert_allclose(sol.eigenvalues, triple.f_r + np.array([-oh, 0.0, oh]), rtol=1e-12)


@settings(max_examples=100)
@given(st.floats(0.0, 40.0), st.floats(0.0, 40.0), st.floats(2000.0, 4000.0))
def test_triple_resonance_modes_match_numeric(g, om, f):
    if math.hypot(g, om) < 1e-3:
        return
    p = presets.triple_resonance(f).evolve(g_t=g, omega_e=om)
    modes = ham.triple_resonance_modes(p)
    sol = eigendecompose(build_single_excitation(p))
    np.testing.assert_allclose(sol.eigenvalues, [modes.E_minus, modes.E_D, modes.E_plus],
                               rtol=1e-12)
    u = modes.eigenvectors()
    h = build_single_excitation(p).entries
    np.testing.assert_allclose(h @ u, u * [modes.E_minus, modes.E_D, modes.E_plus],
                               atol=1e-9 * f)
    np.testing.assert_allclose(u.T @ u, np.eye(3), atol=1e-12)


def test_triple_resonance_modes_preconditions(triple):
    with pytest.raises(ValueError):
        ham.triple_resonance_modes(triple.evolve(f_t=3005.0))
    with pytest.raises(ValueError):
        ham.triple_resonance_modes(triple.evolve(g_t=0.0, omega_e=0.0))


@settings(max_examples=50)
@given(st.floats(-60.0, 60.0), st.floats(0.1, 30.0), st.floats(0.1, 30.0))
def test_bright_dark_frame(detuning, g, om):
    p = presets.triple_resonance().evolve(f_t=3001.2 + detuning, g_t=g, omega_e=om)
    frame = ham.bright_dark_transform(p)
    h = frame.rotate(build_single_excitation(p))
    assert abs(h[0, 2]) <= 1e-12 * 3001.2
    assert h[0, 1] == pytest.approx(p.omega_h, rel=1e-12)
    assert h[1, 2] == pytest.approx(frame.chi, abs=1e-10)
    assert h[1, 1] == pytest.approx(frame.f_B, rel=1e-14)
    assert h[2, 2] == pytest.approx(frame.f_D, rel=1e-14)


def test_bright_dark_at_resonance(triple):
    frame = ham.bright_dark_transform(triple)
    assert frame.chi == 0.0
    with pytest.raises(ValueError):
        ham.bright_dark_transform(triple.evolve(g_t=0.0, omega_e=0.0))


def test_hyperfine_zero_coupling(triple):
    p = triple.evolve(g_t=0.0, omega_e=0.0)
    one = ham.one_photon_transitions(p)
    np.testing.assert_allclose(one, sorted([p.f_r, p.f_t, p.f_s - 2.2, p.f_s, p.f_s + 2.2]),
                               atol=1e-9)
    h1 = build_hyperfine(p, 1)
    assert len(h1.basis) == 6 and len(build_hyperfine(p, 2).basis) == 21


def test_hyperfine_coupling_weights(triple):
    h = build_hyperfine(triple, 1).block(1)
    res = h.basis.index((1, 0, 0, 0, 0))
    spins = [h.basis.index(s) for s in ((0, 0, 1, 0, 0), (0, 0, 0, 1, 0), (0, 0, 0, 0, 1))]
    weights = h.entries[res, spins] ** 2
    assert np.sum(weights) == pytest.approx(triple.omega_e ** 2, rel=1e-14)
    assert h.entries[res, h.basis.index((0, 1, 0, 0, 0))] == pytest.approx(triple.g_t)


def test_two_photon_anharmonic_shift(triple):
    p = triple.evolve(g_t=0.0, omega_e=0.0, f_t=3100.0)
    h2 = build_hyperfine(p, 2).block(2)
    diag = np.diag(h2.entries)
    bare = np.array([np.dot([p.f_r, p.f_t, p.f_s - 2.2, p.f_s, p.f_s + 2.2], s)
                     for s in h2.basis.states])
    shift = diag - bare
    for s, d in zip(h2.basis.states, shift):
        assert d == pytest.approx(p.anharm_delta if s[1] == 2 else 0.0, abs=1e-9)
    two = ham.two_photon_transitions(p)
    assert two.size == 15
    assert two[0] == pytest.approx(0.5 * (2 * 3100.0 - 203.1))


def test_hyperfine_sqrt_factors(triple):
    h = build_hyperfine(triple, 2)
    i = h.basis.index((2, 0, 0, 0, 0))
    j = h.basis.index((1, 1, 0, 0, 0))
    assert h.entries[i, j] == pytest.approx(triple.g_t * math.sqrt(2))
    with pytest.raises(ValueError):
        build_hyperfine(triple, 3)


def test_hyperfine_blocks_decouple(triple):
    h = build_hyperfine(triple, 2)
    exc = h.basis.excitations()
    mixed = h.entries[np.not_equal.outer(exc, exc)]
    assert np.all(mixed == 0.0)


def test_effective_hamiltonian_limits(triple):
    p = triple.evolve(g_t=0.0, omega_e=0.0)
    w = ham.effective_eigenvalues(p)
    fwhm = sorted([p.kappa, p.gamma_t, p.density.fwhm + p.gamma_s])
    np.testing.assert_allclose(sorted(-2 * w.imag), fwhm, rtol=1e-12)
    h = ham.effective_hamiltonian(triple)
    np.testing.assert_array_equal(h, h.T)
    np.testing.assert_allclose(ham.effective_eigenvalues(triple, 0.0).real,
                               [2982.5072, 3001.2, 3019.8928], atol=0.1)
