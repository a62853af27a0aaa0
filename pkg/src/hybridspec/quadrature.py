"""Backend selection and checked entry points for the quadrature kernels.

The compiled kernel (``hybridspec._kernel``) is used when it imports;
otherwise the numpy twin in ``hybridspec._kernel_py`` runs the same
algorithm.  :func:`use_backend` switches explicitly (tests, benchmarks).
"""
import logging
from contextlib import contextmanager

import numpy as np

from . import _kernel_py

logger = logging.getLogger(__name__)

try:
    from . import _kernel as _compiled
except ImportError:  # pragma: no cover - exercised only without a build
    _compiled = None

_BACKENDS = {"python": _kernel_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

_active = _BACKENDS.get("compiled", _kernel_py)

STATUS_TEXT = {
    1: "interval depth limit reached",
    2: "tail panels did not converge",
}


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def use_backend(name):
    """Select ``"compiled"`` or ``"python"``; returns the previous name."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {available_backends()}")
    previous = backend_name()
    _active = _BACKENDS[name]
    return previous


@contextmanager
def backend(name):
    previous = use_backend(name)
    try:
        yield
    finally:
        use_backend(previous)


def _power_tail(q, edge, terms=6):
    """``int_edge^inf (1 + (q-1) x^2)^(-1/(q-1)) dx`` by its large-x series."""
    m = 1.0 / (q - 1.0)
    log_qm1 = np.log(q - 1.0)
    log_edge = np.log(edge)
    total = 0.0
    coeff = 1.0  # binomial coefficient C(-m, k)
    for k in range(terms):
        expo = -(m + k) * log_qm1 + (1.0 - 2.0 * m - 2.0 * k) * log_edge
        total += coeff * np.exp(expo) / (2.0 * m + 2.0 * k - 1.0)
        coeff *= (-m - k) / (k + 1.0)
    return total


def _power_tail_dq(q, edge):
    step = 1e-6 * max(q - 1.0, 1e-3)
    return (_power_tail(q + step, edge) - _power_tail(q - step, edge)) / (2.0 * step)


def qgauss_moments(q, rel_tol=1e-10, tail_tol=1e-12):
    """Area under the unnormalised q-Gaussian and its q-derivative.

    Returns ``(I, dI_dq)`` where ``I = int (1 + (q-1) x^2)^(1/(1-q)) dx``
    (``exp(-x^2)`` at ``q = 1``).
    """
    q = float(q)
    if not q < 3.0:
        raise ValueError(f"q-Gaussian is not normalisable for q >= 3 (got q={q})")
    area, darea, status = _active.qgauss_moments(q, rel_tol, tail_tol)
    if status == _kernel_py.EDGE_REACHED:
        edge = _kernel_py.MOMENT_EDGE
        area += 2.0 * _power_tail(q, edge)
        darea += 2.0 * _power_tail_dq(q, edge)
    elif status:
        raise QuadratureError(f"q-Gaussian normalisation at q={q}: {STATUS_TEXT[status]}")
    return area, darea


def cauchy_transform(xi, eta, q, ncomp=1, rel_tol=1e-8, tail_tol=1e-10):
    """``int g(x) / (x - xi - i*eta) dx`` for ``g`` in ``(h, dh/dx, dh/dq)[:ncomp]``.

    ``xi`` is the scaled probe offset ``(f_p - center) / width`` and ``eta``
    the scaled half linewidth ``gamma_s / (2 * width)``.  Returns a complex
    array of shape ``(ncomp, len(xi))``.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    values, status, achieved = _active.cauchy_transform(
        np.asarray(xi, dtype=float), float(eta), float(q), int(ncomp), rel_tol, tail_tol)
    bad = np.nonzero(status)[0]
    if bad.size:
        worst = float(np.max(achieved[bad]))
        raise QuadratureError(
            f"susceptibility quadrature failed at {bad.size} probe point(s) "
            f"({STATUS_TEXT[int(status[bad[0]])]}); achieved relative error {worst:.2e}",
            achieved=worst)
    return values
