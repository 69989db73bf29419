import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optospring.errors import SingularityError
from optospring.model_params import DimensionlessModel, PhysicalParams, reduce
from optospring.rigidity import (
    StabilityClass,
    dimensionless_susceptibility,
    effective_susceptibility,
    optical_rigidity,
    spring_constants,
    stability_class,
)


def params(xi=-0.70710678, eta=1.777e9, power=0.042):
    lab = PhysicalParams.laboratory()
    return PhysicalParams(mass=lab.mass, pump_angular_frequency=lab.pump_angular_frequency,
                          half_bandwidth=lab.half_bandwidth, dispersive_coeff=xi,
                          dissipative_coeff=eta, input_power=power)


def test_static_rigidity_is_real():
    p = params()
    k0 = optical_rigidity(0.0, p)
    assert k0.imag == 0
    assert k0.real == pytest.approx(spring_constants(p).kappa, rel=1e-14)


def test_rigidity_at_half_bandwidth():
    p = params()
    kappa = spring_constants(p).kappa
    assert optical_rigidity(p.half_bandwidth / 2, p) == pytest.approx(kappa * (1 + 1j) / 2, rel=1e-14)


def test_lab_spring():
    sc = spring_constants(PhysicalParams.laboratory())
    assert sc.kappa == pytest.approx(2.82e4, rel=1e-3)
    assert sc.omega0_mech == pytest.approx(7.5e2, rel=2e-3)
    assert abs(sc.delta) == pytest.approx(3.76, rel=1e-3)
    assert sc.omega0_mech / PhysicalParams.laboratory().half_bandwidth == pytest.approx(0.05, rel=0.02)


@settings(max_examples=200, deadline=None)
@given(xi=st.floats(-5, 5).filter(lambda v: abs(v) > 1e-3),
       eta=st.floats(-5e9, 5e9).filter(lambda v: abs(v) > 1.0))
def test_signs_and_ratio(xi, eta):
    p = params(xi, eta)
    sc = spring_constants(p)
    assert np.sign(sc.kappa) == -np.sign(xi * eta)
    assert np.sign(sc.delta) == np.sign(xi * eta)
    assert abs(sc.delta) * p.half_bandwidth == pytest.approx(2 * abs(sc.kappa), rel=1e-12)


@pytest.mark.parametrize("xi,eta", [(0.0, 1.777e9), (-0.7071, 0.0)])
def test_no_spring(xi, eta):
    sc = spring_constants(params(xi, eta))
    assert sc.kappa == 0 and sc.delta == 0
    assert stability_class(params(xi, eta)) is StabilityClass.NO_SPRING


def test_classes():
    assert stability_class(params(-0.7071, 1.777e9)) is StabilityClass.UNSTABLE_SPRING
    assert stability_class(params(0.7071, 1.777e9)) is StabilityClass.UNSTABLE_ANTI_SPRING
    assert math.isnan(spring_constants(params(0.7071, 1.777e9)).omega0_mech)
    assert stability_class(reduce(params())) is StabilityClass.UNSTABLE_SPRING
    assert stability_class(DimensionlessModel.uncoupled()) is StabilityClass.NO_SPRING


def test_taylor_error_bound():
    p = params()
    sc = spring_constants(p)
    omega = np.linspace(1.0, 0.2 * p.half_bandwidth, 500)
    exact = optical_rigidity(omega, p)
    taylor = sc.kappa - 1j * omega * sc.delta
    rel = np.abs(taylor - exact) / np.abs(exact)
    u2 = (2 * omega / p.half_bandwidth) ** 2
    assert np.all(rel <= u2 * (1 + 1e-6) + 1e-15)
    np.testing.assert_allclose(rel[omega > 100], u2[omega > 100], rtol=1e-6)


def test_power_scaling():
    a, b = spring_constants(params(power=0.01)), spring_constants(params(power=0.04))
    assert b.kappa / a.kappa == pytest.approx(4.0, rel=1e-12)
    assert b.omega0_mech / a.omega0_mech == pytest.approx(2.0, rel=1e-12)


def test_free_mass_susceptibility():
    p = params(0.0, 1.777e9)
    omega = np.array([10.0, 100.0])
    assert effective_susceptibility(omega, p) == pytest.approx(-1 / (p.mass * omega ** 2), rel=1e-14)


def test_resonant_susceptibility_taylor():
    p = params()
    sc = spring_constants(p)
    chi = effective_susceptibility(sc.omega0_mech, p, exact=False)
    assert abs(chi) == pytest.approx(1 / (sc.omega0_mech * abs(sc.delta)), rel=1e-9)


def test_damping_against_optical_antidamping():
    # the optical viscosity of a positive spring is negative, so a small
    # intrinsic damping first cancels it (taller peak) and only damping
    # beyond twice |delta|/m lowers the peak below the undamped value
    p = params()
    sc = spring_constants(p)
    w = sc.omega0_mech
    optical = abs(sc.delta) / p.mass
    undamped = abs(effective_susceptibility(w, p))
    assert abs(effective_susceptibility(w, p, gamma_m=0.1 * w)) > undamped
    assert abs(effective_susceptibility(w, p, gamma_m=3 * optical)) < undamped


def test_damping_lowers_antispring_response():
    p = params(xi=0.70710678)
    omega = 500.0
    assert abs(effective_susceptibility(omega, p, gamma_m=75.0)) < abs(effective_susceptibility(omega, p))


def test_pole_detected():
    m = DimensionlessModel.uncoupled()
    with pytest.raises(SingularityError):
        dimensionless_susceptibility(0.0, m)
    with pytest.raises(ValueError):
        effective_susceptibility(1.0, params(), gamma_m=-1.0)


def test_dimensionless_matches_dimensional():
    p = params()
    m = reduce(p)
    omega = np.geomspace(10, 5000, 50)
    x = omega / p.half_bandwidth
    dim = effective_susceptibility(omega, p, gamma_m=7.0)
    red = dimensionless_susceptibility(x, m, 7.0 / p.half_bandwidth) / (p.mass * p.half_bandwidth ** 2)
    np.testing.assert_allclose(dim, red, rtol=1e-10)
