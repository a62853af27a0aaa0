import math

import numpy as np
import pytest
from scipy import integrate
from hypothesis import given, strategies as st

from hybridspec import presets
from hybridspec.params import (ConfigError, DomainError, QGaussianDensity, SystemParams,
                               collective_linewidth_from_polariton, cooperativity,
                               hybrid_coupling, polariton_linewidth, qgaussian_fwhm,
                               qgaussian_normalize, width_from_fwhm)

couplings = st.floats(0.0, 100.0, allow_nan=False)


def test_hybrid_coupling_value():
    assert hybrid_coupling(17.490, 6.597) == pytest.approx(18.6929, abs=5e-4)
    assert hybrid_coupling(3.0, 4.0) == 5.0
    assert hybrid_coupling(0.0, 0.0) == 0.0


def test_hybrid_coupling_rejects_negative():
    with pytest.raises(DomainError):
        hybrid_coupling(-1.0, 1.0)


@given(couplings, couplings)
def test_hybrid_coupling_bounds(g, om):
    oh = hybrid_coupling(g, om)
    assert oh >= max(g, om) - 1e-12
    assert oh <= g + om + 1e-12
    assert oh * oh == pytest.approx(g * g + om * om, rel=1e-12, abs=1e-300)


def test_cooperativity():
    assert cooperativity(18.693, 0.171, 2 * 6.0 - 0.171) == pytest.approx(
        4 * 18.693 ** 2 / (0.171 * 11.829))
    with pytest.raises(ZeroDivisionError):
        cooperativity(1.0, 0.0, 1.0)
    with pytest.raises(DomainError):
        cooperativity(1.0, -1.0, 1.0)


@given(st.floats(0.1, 50.0), st.floats(0.01, 5.0))
def test_polariton_linewidth_inverse(gamma_te, kappa):
    gamma_h = polariton_linewidth(kappa, gamma_te)
    assert collective_linewidth_from_polariton(gamma_h, kappa) == pytest.approx(gamma_te)


def test_collective_linewidth_domain():
    with pytest.raises(DomainError):
        collective_linewidth_from_polariton(0.05, 0.171)


def test_fwhm_limits():
    # Gaussian exp(-x^2): half maximum at sqrt(ln 2); Lorentzian 1/(1+x^2): at 1
    assert qgaussian_fwhm(1.0, 1.0) == pytest.approx(2 * math.sqrt(math.log(2)))
    assert qgaussian_fwhm(1.0, 2.0) == pytest.approx(2.0)
    assert qgaussian_fwhm(1.0, 1.0 + 1e-9) == pytest.approx(2 * math.sqrt(math.log(2)), rel=1e-6)


@given(st.floats(0.2, 2.9), st.floats(0.1, 10.0))
def test_fwhm_is_half_maximum(q, width):
    d = qgaussian_normalize(3000.0, width, q)
    half = 0.5 * qgaussian_fwhm(width, q)
    assert d(3000.0 + half) == pytest.approx(0.5 * d(3000.0), rel=1e-9)
    assert width_from_fwhm(qgaussian_fwhm(width, q), q) == pytest.approx(width)


def test_preset_width():
    w = width_from_fwhm(3.434, 1.9591)
    assert w == pytest.approx(1.73059, abs=1e-4)
    assert presets.ensemble_characterization().density.fwhm == pytest.approx(3.434)


@pytest.mark.parametrize("q", [0.5, 1.0, 1.5, 1.9591, 2.0, 2.5])
def test_density_unit_area(q):
    d = qgaussian_normalize(3000.0, 1.7, q)
    inner, _ = integrate.quad(d, 2990.0, 3010.0, limit=200)
    lo, _ = integrate.quad(d, -np.inf, 2990.0, limit=200)
    hi, _ = integrate.quad(d, 3010.0, np.inf, limit=200)
    assert inner + lo + hi == pytest.approx(1.0, rel=1e-7)


def test_density_validation():
    with pytest.raises(DomainError):
        qgaussian_normalize(3000.0, 1.0, 3.0)
    with pytest.raises(DomainError):
        qgaussian_normalize(3000.0, 0.0, 2.0)
    with pytest.raises(DomainError):
        QGaussianDensity(3000.0, 1.0, 2.0, -1.0)


def test_compact_support_below_one():
    d = qgaussian_normalize(3000.0, 1.0, 0.5)
    edge = 1.0 / math.sqrt(0.5)
    assert d(3000.0 + 1.01 * edge) == 0.0
    assert d(3000.0 + 0.99 * edge) > 0.0


def test_system_validation(triple):
    with pytest.raises(DomainError):
        triple.evolve(kappa=-0.1)
    with pytest.raises(DomainError):
        triple.evolve(f_r=0.0)
    with pytest.raises(ConfigError):
        triple.evolve(bogus=1.0)
    with pytest.raises(DomainError):
        SystemParams(3000.0, 0.1, 3000.0, 1.0, 3000.0, 1.0, 1.0,
                     qgaussian_normalize(2999.0, 1.0, 2.0))


def test_evolve_keeps_density_consistent(triple):
    p = triple.evolve(f_s=2990.0)
    assert p.density.f_center == 2990.0 and p.density.rho0 == triple.density.rho0
    p = triple.evolve(q=1.5)
    assert p.q == 1.5 and p.density.rho0 != triple.density.rho0


def test_json_round_trip(triple):
    assert SystemParams.from_dict(triple.to_dict()) == triple


def test_from_dict_errors(triple):
    data = triple.to_dict()
    with pytest.raises(ConfigError) as exc:
        SystemParams.from_dict(dict(data, omega=1.0))
    assert exc.value.key == "omega"
    bad = dict(data)
    del bad["f_r"]
    with pytest.raises(ConfigError) as exc:
        SystemParams.from_dict(bad)
    assert exc.value.key == "f_r"
    with pytest.raises(ConfigError) as exc:
        SystemParams.from_dict(dict(data, kappa="wide"))
    assert exc.value.key == "kappa"
    with pytest.raises(ConfigError):
        SystemParams.from_dict(dict(data, kappa=-1.0))


def test_from_dict_defaults(triple):
    data = triple.to_dict()
    for key in ("gamma_s", "anharm_delta", "hyperfine_alpha"):
        del data[key]
    p = SystemParams.from_dict(data)
    assert (p.gamma_s, p.anharm_delta, p.hyperfine_alpha) == (0.001, -203.1, 2.2)


@given(st.floats(2000.0, 4000.0), st.floats(0.0, 5.0), st.floats(0.0, 30.0),
       st.floats(1.0, 2.9), st.floats(0.1, 5.0))
def test_json_round_trip_property(f, kappa, g, q, width):
    p = SystemParams.build(f_r=f, kappa=kappa, f_t=f + 1.0, gamma_t=1.0, f_s=f - 1.0,
                           g_t=g, omega_e=0.5 * g, q=q, width=width)
    assert SystemParams.from_dict(p.to_dict()) == p
