"""Optical rigidity created by the product of dispersive and dissipative
coupling, and the resulting mechanical susceptibility."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import constants
from .errors import SingularityError
from .model_params import DimensionlessModel, PhysicalParams


class StabilityClass(enum.Enum):
    UNSTABLE_SPRING = "unstable_spring"  # kappa > 0, anti-damping
    UNSTABLE_ANTI_SPRING = "unstable_anti_spring"  # kappa < 0, damped
    NO_SPRING = "no_spring"


@dataclass(frozen=True)
class SpringConstants:
    """Static stiffness ``kappa`` [N/m], signed viscosity ``delta`` [N s/m]
    (K ~ kappa - i Omega delta) and ``omega0_mech`` = sqrt(kappa/m) [rad/s],
    NaN for a negative stiffness."""

    kappa: float
    delta: float
    omega0_mech: float


def _product(params: PhysicalParams) -> float:
    # hbar w0 xi eta A^2, the common factor of every rigidity term
    return (
        constants.HBAR * params.pump_angular_frequency
        * params.dispersive_coeff * params.dissipative_coeff * params.photon_flux
    )


def optical_rigidity(omega, params: PhysicalParams):
    """Complex stiffness K(Omega) = -4 hbar w0 xi eta A^2 / (gamma0/2 - i Omega)."""
    omega = np.asarray(omega, dtype=float)
    k = -4.0 * _product(params) / (params.half_bandwidth / 2.0 - 1j * omega)
    return k[()] if k.ndim == 0 else k


def spring_constants(params: PhysicalParams) -> SpringConstants:
    """First-order expansion of K in i*Omega."""
    gamma0 = params.half_bandwidth
    kappa = -8.0 * _product(params) / gamma0
    delta = 16.0 * _product(params) / (gamma0 * gamma0)
    omega0 = math.sqrt(kappa / params.mass) if kappa >= 0 else math.nan
    return SpringConstants(kappa=kappa, delta=delta, omega0_mech=omega0)


def stability_class(params: PhysicalParams | DimensionlessModel) -> StabilityClass:
    if isinstance(params, DimensionlessModel):
        sign = params.spring_sign if params.x0 > 0 else 0
    else:
        kappa = spring_constants(params).kappa
        sign = (kappa > 0) - (kappa < 0)
    if sign > 0:
        return StabilityClass.UNSTABLE_SPRING
    if sign < 0:
        return StabilityClass.UNSTABLE_ANTI_SPRING
    return StabilityClass.NO_SPRING


def effective_susceptibility(omega, params: PhysicalParams, gamma_m: float = 0.0,
                             *, exact: bool = True):
    """Displacement response to force, chi = 1/(K - m Omega^2 - i Omega m gamma_m).

    ``gamma_m`` [1/s] is an optional intrinsic viscous damping used to tame
    the anti-damping of the optical spring. With ``exact=False`` the
    rigidity is replaced by its two-term expansion kappa - i Omega delta.
    """
    if gamma_m < 0:
        raise ValueError("gamma_m must be non-negative")
    omega = np.asarray(omega, dtype=float)
    m = params.mass
    if exact:
        k = optical_rigidity(omega, params)
    else:
        sc = spring_constants(params)
        k = sc.kappa - 1j * omega * sc.delta
    den = k - m * omega * omega - 1j * omega * m * gamma_m
    den = np.asarray(den)
    bad = np.abs(den) < 1e-300
    if np.any(bad):
        where = np.atleast_1d(omega)[np.atleast_1d(bad)][0]
        raise SingularityError(f"susceptibility pole at Omega = {where!r} rad/s")
    chi = 1.0 / den
    return chi[()] if chi.ndim == 0 else chi


def dimensionless_susceptibility(x, model: DimensionlessModel, damping: float = 0.0,
                                 *, exact: bool = True):
    """Mechanical response in units of 1/(m gamma0^2).

    exact:    1 / (k/(1 - 2ix) - x^2 - i damping x)
    adiabatic 1 / ((k - x^2) + i x (2k - damping))
    with k = spring_sign * x0^2 and ``damping`` = gamma_m / gamma0.
    """
    x = np.asarray(x, dtype=float)
    k = model.stiffness
    if exact:
        den = k / (1.0 - 2j * x) - x * x - 1j * damping * x
    else:
        den = (k - x * x) + 1j * x * (2.0 * k - damping)
    den = np.asarray(den)
    bad = np.abs(den) < 1e-300
    if np.any(bad):
        where = np.atleast_1d(x)[np.atleast_1d(bad)][0]
        raise SingularityError(f"susceptibility pole at x = {where!r}")
    chi = 1.0 / den
    return chi[()] if chi.ndim == 0 else chi
