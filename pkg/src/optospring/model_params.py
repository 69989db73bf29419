"""Coupling coefficients of the Michelson-Sagnac generalized mirror and the
reduced (dimensionless) model of the combined-coupling cavity.

Two realizations are supported: a movable beam splitter with fixed mirrors,
and a movable partially transmitting mirror with a fixed beam splitter. Both
produce a dispersive coefficient ``xi`` (shift of the cavity eigenfrequency
per unit displacement, relative) and a dissipative coefficient ``eta`` (shift
of the relaxation rate per unit displacement, relative).

All downstream spectra are pure functions of :class:`DimensionlessModel`.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import constants
from .errors import (
    DegenerateModelError,
    DomainError,
    RegimeWarning,
    VariantMismatchError,
)

MAX_TRANSMITTANCE = 0.3
SMALL_X_LIMIT = 0.3

# Laboratory parameter set used as the default configuration.
LAB_T0 = 0.01
LAB_MASS = 0.05
LAB_PUMP_FREQ = 2.0 * math.pi * 3.0e14
LAB_POWER = 0.042
LAB_LENGTH = 1.0


class Variant(enum.Enum):
    MOVABLE_BEAM_SPLITTER = "bs"
    MOVABLE_MIRROR = "mirror"


@dataclass(frozen=True)
class MsiGeometry:
    """Layout of the generalized-mirror interferometer.

    ``mean_transmittance`` is T0 for the beam-splitter variant and
    T1 = sin(2 k z0) for the mirror variant. ``round_trip_time`` defaults
    to 2 L / c.
    """

    variant: Variant
    cavity_length: float
    pump_angular_frequency: float
    mean_transmittance: float
    mirror_reflectivity: float | None = None
    mirror_transmittance: float | None = None
    round_trip_time: float | None = None

    def __post_init__(self):
        if not self.cavity_length > 0:
            raise DomainError(f"cavity_length must be > 0, got {self.cavity_length}")
        if not self.pump_angular_frequency > 0:
            raise DomainError(
                f"pump_angular_frequency must be > 0, got {self.pump_angular_frequency}"
            )
        t = self.mean_transmittance
        if not 0 < abs(t) < MAX_TRANSMITTANCE:
            raise DomainError(
                f"mean transmittance must satisfy 0 < |T| < {MAX_TRANSMITTANCE}, got {t}"
            )
        if self.variant is Variant.MOVABLE_BEAM_SPLITTER and t < 0:
            raise DomainError(f"T0 must be positive, got {t}")
        if self.variant is Variant.MOVABLE_MIRROR:
            r_m, t_m = self.mirror_reflectivity, self.mirror_transmittance
            if r_m is None or t_m is None:
                raise DomainError("mirror variant needs mirror_reflectivity and mirror_transmittance")
            if r_m < 0 or t_m < 0:
                raise DomainError("mirror amplitudes must be non-negative")
            if abs(r_m * r_m + t_m * t_m - 1.0) > 1e-12:
                raise DomainError(
                    f"r_M^2 + t_M^2 must equal 1 (got {r_m * r_m + t_m * t_m!r})"
                )
        if self.round_trip_time is not None and not self.round_trip_time > 0:
            raise DomainError("round_trip_time must be > 0")

    @property
    def tau(self) -> float:
        if self.round_trip_time is not None:
            return self.round_trip_time
        return 2.0 * self.cavity_length / constants.SPEED_OF_LIGHT

    @property
    def k0(self) -> float:
        return self.pump_angular_frequency / constants.SPEED_OF_LIGHT

    @classmethod
    def laboratory(cls) -> MsiGeometry:
        return cls(
            Variant.MOVABLE_BEAM_SPLITTER,
            cavity_length=LAB_LENGTH,
            pump_angular_frequency=LAB_PUMP_FREQ,
            mean_transmittance=LAB_T0,
        )


@dataclass(frozen=True)
class CouplingCoefficients:
    """Half bandwidth [1/s], dispersive and dissipative coefficients [1/m]."""

    half_bandwidth: float
    dispersive_coeff: float
    dissipative_coeff: float


@dataclass(frozen=True)
class PhysicalParams:
    mass: float
    pump_angular_frequency: float
    half_bandwidth: float
    dispersive_coeff: float
    dissipative_coeff: float
    input_power: float

    def __post_init__(self):
        for name in ("mass", "pump_angular_frequency", "half_bandwidth", "input_power"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be positive and finite, got {value}")
        for name in ("dispersive_coeff", "dissipative_coeff"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")

    @property
    def photon_flux(self) -> float:
        """Mean input photon flux A^2 = I / (hbar w0) [1/s]."""
        return self.input_power / (constants.HBAR * self.pump_angular_frequency)

    @property
    def antispring(self) -> bool:
        """True when xi*eta > 0 (negative stiffness)."""
        return self.dispersive_coeff * self.dissipative_coeff > 0

    @classmethod
    def from_coupling(
        cls, coupling: CouplingCoefficients, *, mass: float, input_power: float,
        pump_angular_frequency: float,
    ) -> PhysicalParams:
        return cls(
            mass=mass,
            pump_angular_frequency=pump_angular_frequency,
            half_bandwidth=coupling.half_bandwidth,
            dispersive_coeff=coupling.dispersive_coeff,
            dissipative_coeff=coupling.dissipative_coeff,
            input_power=input_power,
        )

    @classmethod
    def laboratory(cls) -> PhysicalParams:
        geometry = MsiGeometry.laboratory()
        return cls.from_coupling(
            derive_bs_coupling(geometry),
            mass=LAB_MASS,
            input_power=LAB_POWER,
            pump_angular_frequency=geometry.pump_angular_frequency,
        )


def _sign(value: float) -> int:
    return (value > 0) - (value < 0)


@dataclass(frozen=True)
class DimensionlessModel:
    """Reduced parameter set of the linearized combined-coupling cavity.

    Frequencies are measured in units of the half bandwidth: x = Omega/gamma0.
    ``x0`` is the magnitude of the optical-spring resonance; ``spring_sign``
    is +1 for a positive stiffness (xi*eta < 0), -1 for an anti-spring and 0
    when one of the couplings vanishes. ``dispersive_sign`` and
    ``dissipative_sign`` are the signs of xi and eta; they only matter for
    the time-domain simulation and for the phase of the signal gains.
    """

    p_m: float
    q_m: float
    quality: float
    coupling_ratio: float
    x0: float
    delta_m: float
    photon_flux: float | None = None
    gamma0: float = 1.0
    dispersive_sign: int = -1
    dissipative_sign: int = 1

    def __post_init__(self):
        if self.p_m < 0 or self.q_m < 0 or self.coupling_ratio < 0 or self.x0 < 0:
            raise DomainError("p_m, q_m, coupling_ratio and x0 must be non-negative")
        if not self.quality > 0:
            raise DomainError("quality factor D must be positive")
        if self.x0 > SMALL_X_LIMIT:
            warnings.warn(
                f"x0 = {self.x0:.3g} > {SMALL_X_LIMIT}: outside the small-frequency regime",
                RegimeWarning,
                stacklevel=3,
            )

    @property
    def spring_sign(self) -> int:
        return -self.dispersive_sign * self.dissipative_sign

    @property
    def q_m_d2(self) -> float:
        """Qm * D^2, the dispersive measurement strength."""
        return self.q_m * self.quality * self.quality

    @property
    def stiffness(self) -> float:
        """Signed dimensionless stiffness kappa / (m gamma0^2) = +-x0^2."""
        return self.spring_sign * self.x0 * self.x0

    @classmethod
    def from_ratio(
        cls,
        x0: float,
        g: float,
        *,
        quality: float | None = None,
        gamma0: float | None = None,
        photon_flux: float | None = None,
    ) -> DimensionlessModel:
        """Build the model directly from the spring frequency and coupling ratio.

        Uses Pm = 2 x0^2 g and Qm D^2 = 2 x0^2 / g. ``quality`` and
        ``gamma0`` default to the laboratory values.
        """
        if not (x0 > 0 and math.isfinite(x0)):
            raise DomainError(f"x0 must be positive and finite, got {x0}")
        if not (g > 0 and math.isfinite(g)):
            raise DomainError(f"g must be positive and finite, got {g}")
        if gamma0 is None:
            gamma0 = derive_bs_coupling(MsiGeometry.laboratory()).half_bandwidth
        if quality is None:
            quality = LAB_PUMP_FREQ / gamma0
        p_m = 2.0 * x0 * x0 * g
        q_m = 2.0 * x0 * x0 / (g * quality * quality)
        return cls(
            p_m=p_m,
            q_m=q_m,
            quality=quality,
            coupling_ratio=g,
            x0=x0,
            delta_m=2.0 * x0 * x0,
            photon_flux=photon_flux,
            gamma0=gamma0,
        )

    @classmethod
    def uncoupled(cls, gamma0: float = 1.0) -> DimensionlessModel:
        """Empty cavity with a free test mass: no coupling at all."""
        return cls(
            p_m=0.0, q_m=0.0, quality=1.0, coupling_ratio=0.0, x0=0.0, delta_m=0.0,
            gamma0=gamma0, dispersive_sign=0, dissipative_sign=0,
        )


def derive_bs_coupling(geometry: MsiGeometry) -> CouplingCoefficients:
    """Coupling of the movable-beam-splitter cavity.

    gamma0 = T0^2 / tau, xi = -1 / (sqrt(2) L), eta = 2 sqrt(2) k0 / T0.
    """
    if geometry.variant is not Variant.MOVABLE_BEAM_SPLITTER:
        raise VariantMismatchError(
            f"derive_bs_coupling needs a movable beam splitter, got {geometry.variant.name}"
        )
    t0 = geometry.mean_transmittance
    return CouplingCoefficients(
        half_bandwidth=t0 * t0 / geometry.tau,
        dispersive_coeff=-1.0 / (math.sqrt(2.0) * geometry.cavity_length),
        dissipative_coeff=2.0 * math.sqrt(2.0) * geometry.k0 / t0,
    )


def derive_mirror_coupling(geometry: MsiGeometry) -> CouplingCoefficients:
    """Coupling of the movable partially-transmitting-mirror cavity.

    gamma1 = r_M^2 T1^2 / tau, xi1 = -T1 t_M r_M / L, eta1 = 4 k0 / T1.
    """
    if geometry.variant is not Variant.MOVABLE_MIRROR:
        raise VariantMismatchError(
            f"derive_mirror_coupling needs a movable mirror, got {geometry.variant.name}"
        )
    t1 = geometry.mean_transmittance
    r_m = geometry.mirror_reflectivity
    t_m = geometry.mirror_transmittance
    return CouplingCoefficients(
        half_bandwidth=r_m * r_m * t1 * t1 / geometry.tau,
        dispersive_coeff=-t1 * t_m * r_m / geometry.cavity_length,
        dissipative_coeff=4.0 * geometry.k0 / t1,
    )


def derive_coupling(geometry: MsiGeometry) -> CouplingCoefficients:
    if geometry.variant is Variant.MOVABLE_BEAM_SPLITTER:
        return derive_bs_coupling(geometry)
    return derive_mirror_coupling(geometry)


def expected_mirror_ratio(geometry: MsiGeometry) -> float:
    """Coupling ratio r_M / t_M quoted for the movable-mirror realization."""
    if geometry.variant is not Variant.MOVABLE_MIRROR:
        raise VariantMismatchError("expected_mirror_ratio needs the mirror variant")
    if geometry.mirror_transmittance == 0:
        return math.inf
    return geometry.mirror_reflectivity / geometry.mirror_transmittance


def coupling_ratio(coupling: CouplingCoefficients, pump_angular_frequency: float) -> float:
    """g = |eta| gamma / (2 |xi| w0); power independent. +inf when xi = 0."""
    if coupling.dispersive_coeff == 0:
        return math.inf
    return (
        abs(coupling.dissipative_coeff) * coupling.half_bandwidth
        / (2.0 * abs(coupling.dispersive_coeff) * pump_angular_frequency)
    )


def _transmittance(geometry: MsiGeometry, k, y):
    # phase of the generalized mirror scales with k at fixed arm geometry
    t = geometry.mean_transmittance
    k0 = geometry.k0
    if geometry.variant is Variant.MOVABLE_BEAM_SPLITTER:
        phase = (k / k0) * math.asin(t) + math.sqrt(2.0) * k * y
        return np.sin(phase)
    # y is the mirror displacement z; T = r_M sin 2k(z0 + z)
    phase = (k / k0) * math.asin(t) + 2.0 * k * y
    return geometry.mirror_reflectivity * np.sin(phase)


def intracavity_power(k, y, geometry: MsiGeometry, input_power: float):
    """Circulating power for wavenumber ``k`` [1/m] and displacement ``y`` [m].

    I0 = T^2 I / (1 + R^2 + 2 R cos 2k(L + y/sqrt 2)), with the round-trip
    phase referenced so that the cavity is resonant at ``k0`` for y = 0
    (the arm-length offset is absorbed into that reference).
    """
    k = np.asarray(k, dtype=float)
    y = np.asarray(y, dtype=float)
    t = _transmittance(geometry, k, y)
    r = np.sqrt(1.0 - t * t)
    if geometry.variant is Variant.MOVABLE_BEAM_SPLITTER:
        detune = 2.0 * (k - geometry.k0) * geometry.cavity_length + math.sqrt(2.0) * k * y
    else:
        detune = 2.0 * (k - geometry.k0) * geometry.cavity_length
    # 1 + R^2 + 2R cos(pi + d) rewritten without cancellation near resonance
    one_minus_r = t * t / (1.0 + r)
    power = t * t * input_power / (one_minus_r ** 2 + 4.0 * r * np.sin(detune / 2.0) ** 2)
    return power[()] if power.ndim == 0 else power


def resonance_and_bandwidth(geometry: MsiGeometry, y: float) -> tuple[float, float]:
    """Resonance frequency and half bandwidth, both linear in the displacement.

    Beam-splitter variant: w_r = w0 (1 - y/(sqrt 2 L)) and
    gamma = (T0^2/tau)(1 + 2 sqrt 2 k0 R0 y / T0).
    """
    if geometry.variant is not Variant.MOVABLE_BEAM_SPLITTER:
        raise VariantMismatchError("resonance_and_bandwidth is defined for the beam-splitter variant")
    t0 = geometry.mean_transmittance
    r0 = math.sqrt(1.0 - t0 * t0)
    omega_r = geometry.pump_angular_frequency * (1.0 - y / (math.sqrt(2.0) * geometry.cavity_length))
    gamma = (t0 * t0 / geometry.tau) * (1.0 + 2.0 * math.sqrt(2.0) * geometry.k0 * r0 * y / t0)
    return omega_r, gamma


def reduce(params: PhysicalParams) -> DimensionlessModel:
    """Reduce dimensional parameters to the dimensionless model.

    Pm = 8 hbar eta^2 A^2 / (m gamma0^2), Qm = 32 hbar xi^2 A^2 / (m gamma0^2),
    D = w0 / gamma0, x0 = sqrt(|kappa| / m) / gamma0, delta_m = D sqrt(Pm Qm),
    with A^2 the input photon flux.
    """
    xi, eta = params.dispersive_coeff, params.dissipative_coeff
    if xi == 0 and eta == 0:
        raise DegenerateModelError("xi and eta are both zero")
    hbar = constants.HBAR
    m = params.mass
    gamma0 = params.half_bandwidth
    w0 = params.pump_angular_frequency
    flux = params.photon_flux

    p_m = 8.0 * hbar * eta * eta * flux / (m * gamma0 * gamma0)
    q_m = 32.0 * hbar * xi * xi * flux / (m * gamma0 * gamma0)
    quality = w0 / gamma0
    kappa = -8.0 * hbar * w0 * xi * eta * flux / gamma0
    x0 = math.sqrt(abs(kappa) / m) / gamma0
    delta_m = quality * math.sqrt(p_m * q_m)
    if q_m == 0:
        g = math.inf
    else:
        g = math.sqrt(p_m / (q_m * quality * quality))
    return DimensionlessModel(
        p_m=p_m,
        q_m=q_m,
        quality=quality,
        coupling_ratio=g,
        x0=x0,
        delta_m=delta_m,
        photon_flux=flux,
        gamma0=gamma0,
        dispersive_sign=_sign(xi),
        dissipative_sign=_sign(eta),
    )
