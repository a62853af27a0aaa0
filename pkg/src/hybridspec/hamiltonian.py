"""Hamiltonians of the resonator-transmon-ensemble system and their spectra.

Two levels of description live here:

* the single-excitation 3x3 matrix over ``|1gG>, |0eG>, |0gE>`` (transmon
  two-level, ensemble one collective boson), its analytic solution at
  triple resonance and the bright/dark rotation of the matter pair;
* a five-mode bosonic model (resonator, anharmonic transmon and three
  hyperfine subensembles) truncated to at most ``n_max`` excitations.

Symmetric matrices are diagonalised with a cyclic Jacobi solver; the
non-Hermitian 3x3 with decay rates on the diagonal uses LAPACK.
"""
import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ExcitationBasis", "HamiltonianMatrix", "EigenSolution", "BrightDarkFrame",
    "TripleResonanceModes", "EigenConvergenceError", "ResourceLimitError",
    "enumerate_basis", "jacobi_eigh", "eigendecompose", "build_single_excitation",
    "triple_resonance_modes", "bright_dark_transform", "build_hyperfine",
    "one_photon_transitions", "two_photon_transitions", "effective_hamiltonian",
    "effective_eigenvalues", "SINGLE_MODES", "HYPERFINE_MODES", "MAX_BASIS",
]

SINGLE_MODES = ("resonator", "transmon", "ensemble")
HYPERFINE_MODES = ("resonator", "transmon", "ensemble_m1", "ensemble_0", "ensemble_p1")
MAX_BASIS = 10 ** 6
RESONANCE_TOL = 1e-9


class EigenConvergenceError(ArithmeticError):
    """Jacobi sweeps exhausted before the off-diagonal part vanished."""


class ResourceLimitError(MemoryError):
    """Requested basis is larger than :data:`MAX_BASIS`."""


@dataclass(frozen=True)
class ExcitationBasis:
    """Ordered occupation-number states over a fixed list of modes."""

    modes: tuple
    states: tuple
    n_max: int

    def __post_init__(self):
        if len(set(self.states)) != len(self.states):
            raise ValueError("basis states must be unique")
        for s in self.states:
            if len(s) != len(self.modes) or min(s, default=0) < 0 or sum(s) > self.n_max:
                raise ValueError(f"invalid occupation vector {s}")

    def __len__(self):
        return len(self.states)

    def index(self, state):
        return self._lookup()[tuple(state)]

    def _lookup(self):
        table = self.__dict__.get("_table")
        if table is None:
            table = {s: i for i, s in enumerate(self.states)}
            object.__setattr__(self, "_table", table)
        return table

    def excitations(self):
        return np.array([sum(s) for s in self.states], dtype=int)

    def block_indices(self, n):
        """Positions of the states holding exactly ``n`` excitations."""
        return np.nonzero(self.excitations() == n)[0]


@dataclass(frozen=True)
class HamiltonianMatrix:
    basis: ExcitationBasis
    entries: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.entries, dtype=float)
        n = len(self.basis)
        if h.shape != (n, n):
            raise ValueError(f"matrix shape {h.shape} does not match basis size {n}")
        scale = max(np.max(np.abs(h)), 1.0) if h.size else 1.0
        if h.size and np.max(np.abs(h - h.T)) > 1e-12 * scale:
            raise ValueError("Hamiltonian must be symmetric")
        h.setflags(write=False)
        object.__setattr__(self, "entries", h)

    def block(self, n):
        """Sub-matrix and basis restricted to the ``n``-excitation manifold."""
        idx = self.basis.block_indices(n)
        sub = ExcitationBasis(self.basis.modes, tuple(self.basis.states[i] for i in idx),
                              self.basis.n_max)
        return HamiltonianMatrix(sub, self.entries[np.ix_(idx, idx)])


@dataclass(frozen=True)
class EigenSolution:
    """Ascending eigenvalues and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class BrightDarkFrame:
    """Matter modes rotated into the combination seen by the resonator.

    ``bright`` and ``dark`` hold (transmon, ensemble) amplitudes.
    """

    f_B: float
    f_D: float
    chi: float
    bright: tuple
    dark: tuple

    def rotation(self):
        """Orthogonal 3x3 whose rows are ``a``, ``B``, ``D`` in the bare basis."""
        return np.array([[1.0, 0.0, 0.0],
                         [0.0, self.bright[0], self.bright[1]],
                         [0.0, self.dark[0], self.dark[1]]])

    def rotate(self, h):
        """Express a single-excitation matrix in the ``(a, B, D)`` frame."""
        u = self.rotation()
        entries = h.entries if isinstance(h, HamiltonianMatrix) else np.asarray(h)
        return u @ entries @ u.T


@dataclass(frozen=True)
class TripleResonanceModes:
    E_D: float
    E_plus: float
    E_minus: float
    bright_amplitudes: tuple
    dark_amplitudes: tuple

    def eigenvectors(self):
        """Columns ``|1_->, |D>, |1_+>`` in the ``|1gG>, |0eG>, |0gE>`` basis."""
        bt, be = self.bright_amplitudes
        dt, de = self.dark_amplitudes
        r = 1.0 / math.sqrt(2.0)
        return np.array([[r, 0.0, r],
                         [-r * bt, dt, r * bt],
                         [-r * be, de, r * be]])


def enumerate_basis(mode_count, n_max, modes=None):
    """All occupation vectors with total excitation ``<= n_max``.

    States are graded by total excitation and, within a manifold, sorted in
    descending lexicographic order, so that the one-excitation states follow
    the mode order.
    """
    if mode_count < 1 or n_max < 0:
        raise ValueError("need mode_count >= 1 and n_max >= 0")
    size = math.comb(mode_count + n_max, n_max)
    if size > MAX_BASIS:
        raise ResourceLimitError(f"basis of {size} states exceeds the limit of {MAX_BASIS}")
    if modes is None:
        modes = tuple(f"mode{i}" for i in range(mode_count))
    if len(modes) != mode_count:
        raise ValueError("one label per mode required")
    states = []
    for n in range(n_max + 1):
        block = [c for c in itertools.product(range(n + 1), repeat=mode_count) if sum(c) == n]
        states.extend(sorted(block, reverse=True))
    return ExcitationBasis(tuple(modes), tuple(states), int(n_max))


def _fix_signs(vecs):
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        j = int(np.argmax(np.abs(col)))
        if col[j] < 0:
            vecs[:, k] = -col
    return vecs


def jacobi_eigh(a, max_sweeps=30, tol=1e-14):
    """Symmetric eigenproblem by cyclic Jacobi rotations.

    Returns ascending eigenvalues and orthonormal eigenvector columns, each
    with its largest-magnitude component positive.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    if n == 0:
        return np.zeros(0), v
    scale = np.linalg.norm(a)
    for _ in range(max_sweeps + 1):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale or off == 0.0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * abs(diff):
                    t = apq / diff  # small-angle limit, avoids overflow in theta
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q]
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :]
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    else:
        raise EigenConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], _fix_signs(v[:, order])


def eigendecompose(h, max_sweeps=30):
    """Full spectrum of a :class:`HamiltonianMatrix` (or symmetric array)."""
    entries = h.entries if isinstance(h, HamiltonianMatrix) else np.asarray(h, dtype=float)
    if entries.size and not np.allclose(entries, entries.T, rtol=0.0,
                                        atol=1e-12 * max(np.max(np.abs(entries)), 1.0)):
        raise ValueError("eigendecompose needs a symmetric matrix")
    w, v = jacobi_eigh(entries, max_sweeps=max_sweeps)
    return EigenSolution(w, v)


def _single_basis():
    return ExcitationBasis(SINGLE_MODES, ((1, 0, 0), (0, 1, 0), (0, 0, 1)), 1)


def build_single_excitation(p):
    """3x3 Hamiltonian over ``|1gG>, |0eG>, |0gE>``."""
    h = np.array([[p.f_r, p.g_t, p.omega_e],
                  [p.g_t, p.f_t, 0.0],
                  [p.omega_e, 0.0, p.f_s]])
    return HamiltonianMatrix(_single_basis(), h)


def triple_resonance_modes(p, tol=RESONANCE_TOL):
    """Closed-form dark and bright modes when ``f_r = f_t = f_s``."""
    if abs(p.f_r - p.f_t) > tol or abs(p.f_r - p.f_s) > tol:
        raise ValueError("triple_resonance_modes needs f_r = f_t = f_s")
    omega_h = math.hypot(p.g_t, p.omega_e)
    if omega_h == 0.0:
        raise ValueError("no coupling: bright and dark modes are undefined")
    bright = (p.g_t / omega_h, p.omega_e / omega_h)
    dark = (p.omega_e / omega_h, -p.g_t / omega_h)
    return TripleResonanceModes(p.f_r, p.f_r + omega_h, p.f_r - omega_h, bright, dark)


def bright_dark_transform(p):
    """Frequencies of the bright/dark matter modes and their mutual coupling."""
    oh2 = p.g_t ** 2 + p.omega_e ** 2
    if oh2 == 0.0:
        raise ValueError("bright/dark frame undefined when g_t = omega_e = 0")
    oh = math.sqrt(oh2)
    f_b = (p.f_t * p.g_t ** 2 + p.f_s * p.omega_e ** 2) / oh2
    f_d = (p.f_t * p.omega_e ** 2 + p.f_s * p.g_t ** 2) / oh2
    chi = p.g_t * p.omega_e * (p.f_t - p.f_s) / oh2
    return BrightDarkFrame(f_b, f_d, chi, (p.g_t / oh, p.omega_e / oh),
                           (p.omega_e / oh, -p.g_t / oh))


def build_hyperfine(p, n_max):
    """Five-mode model with hyperfine-split ensemble, up to ``n_max`` excitations.

    Modes are the resonator, the transmon (bosonic with anharmonic shift
    ``anharm_delta / 2 * n (n - 1)``) and three subensembles at
    ``f_s - alpha, f_s, f_s + alpha``, each coupled to the resonator with
    ``omega_e / sqrt(3)``.
    """
    if n_max not in (1, 2):
        raise ValueError("build_hyperfine supports n_max in {1, 2}")
    basis = enumerate_basis(5, n_max, HYPERFINE_MODES)
    alpha = p.hyperfine_alpha
    freqs = np.array([p.f_r, p.f_t, p.f_s - alpha, p.f_s, p.f_s + alpha])
    g_spin = p.omega_e / math.sqrt(3.0)
    links = [(1, p.g_t), (2, g_spin), (3, g_spin), (4, g_spin)]
    n = len(basis)
    h = np.zeros((n, n))
    for i, s in enumerate(basis.states):
        occ = np.array(s)
        h[i, i] = freqs @ occ + 0.5 * p.anharm_delta * s[1] * (s[1] - 1)
        if s[0] == 0:
            continue
        # move one quantum from the resonator into mode m
        for m, g in links:
            t = list(s)
            t[0] -= 1
            t[m] += 1
            j = basis.index(t)
            h[i, j] = h[j, i] = g * math.sqrt(s[0]) * math.sqrt(t[m])
    return HamiltonianMatrix(basis, h)


def one_photon_transitions(p):
    """Energies of the one-excitation dressed states (vacuum at zero)."""
    return eigendecompose(build_hyperfine(p, 1).block(1)).eigenvalues


def two_photon_transitions(p):
    """Half of the two-excitation dressed-state energies."""
    return 0.5 * eigendecompose(build_hyperfine(p, 2).block(2)).eigenvalues


def effective_hamiltonian(p, gamma_ens=None):
    """Non-Hermitian 3x3 with each mode damped by ``-i * FWHM / 2``.

    The ensemble width defaults to the FWHM of its density plus ``gamma_s``,
    exact when the density is Lorentzian.
    """
    if gamma_ens is None:
        gamma_ens = p.density.fwhm + p.gamma_s
    return np.array([[p.f_r - 0.5j * p.kappa, p.g_t, p.omega_e],
                     [p.g_t, p.f_t - 0.5j * p.gamma_t, 0.0],
                     [p.omega_e, 0.0, p.f_s - 0.5j * gamma_ens]], dtype=complex)


def effective_eigenvalues(p, gamma_ens=None):
    """Complex eigenvalues of :func:`effective_hamiltonian`, ascending real part.

    The real parts are dressed frequencies and ``-2 * imag`` their FWHMs.
    """
    w = np.linalg.eigvals(effective_hamiltonian(p, gamma_ens))
    return w[np.argsort(w.real, kind="stable")]
