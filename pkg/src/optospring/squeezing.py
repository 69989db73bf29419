"""Ponderomotive squeezing of the reflected light.

The detected quadrature PSD at homodyne angle theta is

    S_theta(x) = (W + U cos 2theta + V sin 2theta) / ((x0^2 - x^2)^2 + 4 x^2 x0^4)

with W, U, V polynomials in x, x0 and the coupling ratio g. For the
lossless model W^2 - U^2 - V^2 equals the squared denominator, so the
extreme PSDs over theta multiply to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AngleIndifferentError, PureCouplingError
from .force_sensing import quadrature_transfer
from .model_params import DimensionlessModel
from .spectrum import SpectrumResult, check_grid, regime_metadata

INDIFFERENT_RTOL = 1e-14


@dataclass(frozen=True)
class WuvTriple:
    w: np.ndarray | float
    u: np.ndarray | float
    v: np.ndarray | float
    denom: np.ndarray | float


def _check_model(model: DimensionlessModel) -> tuple[float, float]:
    g = model.coupling_ratio
    if not (0 < g < math.inf):
        raise PureCouplingError(
            f"coupling ratio g = {g}: W/U/V need finite g > 0; "
            "use low_freq_limit / dispersive_reference for the pure-coupling limits"
        )
    if model.x0 <= 0:
        raise PureCouplingError("x0 = 0: no optical spring, squeezing formulas do not apply")
    return model.x0, g


def wuv(x, model: DimensionlessModel) -> WuvTriple:
    x0, g = _check_model(model)
    x = np.asarray(x, dtype=float)
    x2, a2, a4 = x * x, x0 * x0, x0 ** 4
    detune = a2 - x2
    w = detune ** 2 + 2.0 * a4 / g ** 2 + 2.0 * x2 * x2 * a4 * g * g
    u = 2.0 * a2 * (x2 * x2 * a2 * g * g - a2 / g ** 2)
    v = 2.0 * a2 * detune * (1.0 / g - x2 * g)
    denom = detune ** 2 + 4.0 * x2 * a4
    if x.ndim == 0:
        return WuvTriple(float(w), float(u), float(v), float(denom))
    return WuvTriple(w, u, v, denom)


def output_quadrature_psd(x, theta, model: DimensionlessModel, *, damping: float = 0.0,
                          exact: bool = False):
    """Single-sided PSD of the detected output quadrature (vacuum = 1).

    ``damping`` (gamma_m/gamma0) or ``exact=True`` switch to the general
    transfer-function evaluation used to compare with simulations.
    """
    theta = np.asarray(theta, dtype=float)
    if damping != 0.0 or exact:
        gain_a, gain_phi, _ = quadrature_transfer(x, theta, model, damping=damping, exact=exact)
        return np.abs(gain_a) ** 2 + np.abs(gain_phi) ** 2
    x0, g = _check_model(model)
    x = np.asarray(x, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    detune = x0 * x0 - x * x
    # |amplitude-noise gain|^2 + |phase-noise gain|^2; free of the W + U
    # cancellation that loses digits near x = x0
    num = (detune * c + 2.0 * x0 * x0 / g * s) ** 2 + (detune * s - 2.0 * x0 * x0 * x * x * g * c) ** 2
    return num / (detune * detune + 4.0 * x * x * x0 ** 4)


def wuv_psd(x, theta, model: DimensionlessModel):
    """S_theta assembled from the W/U/V decomposition."""
    t = wuv(x, model)
    theta = np.asarray(theta, dtype=float)
    return (t.w + t.u * np.cos(2.0 * theta) + t.v * np.sin(2.0 * theta)) / t.denom


def optimal_angle_at(x_c: float, model: DimensionlessModel) -> float:
    """Homodyne angle in [0, pi) minimizing S_theta at x = x_c."""
    t = wuv(x_c, model)
    if math.hypot(t.u, t.v) <= INDIFFERENT_RTOL * t.w:
        raise AngleIndifferentError(f"U = V = 0 at x = {x_c}: every angle gives S = W/denom")
    return (0.5 * math.atan2(-t.v, -t.u)) % math.pi + 0.0


def squeeze_minmax(x, model: DimensionlessModel):
    """Minimum and maximum of S_theta over theta, and their product.

    Both extremes are evaluated with the cancellation-free PSD at the
    optimal angle and at the angle a quarter turn away, so strongly squeezed
    values keep their relative accuracy.
    """
    theta = per_frequency_optimal_angle(x, model)
    s_min = output_quadrature_psd(x, theta, model)
    s_max = output_quadrature_psd(x, theta + math.pi / 2.0, model)
    return s_min, s_max, s_min * s_max


def per_frequency_optimal_angle(x, model: DimensionlessModel):
    t = wuv(x, model)
    return (0.5 * np.arctan2(-t.v, -t.u)) % np.pi + 0.0


def optimal_psd_curve(x_c: float, grid, model: DimensionlessModel) -> SpectrumResult:
    """PSD with the homodyne angle held at the optimum for x_c over the whole grid.

    Also carries the fully frequency-dependent optimum ``s_envelope``.
    """
    grid = check_grid(grid)
    theta = optimal_angle_at(x_c, model)
    s_fixed = output_quadrature_psd(grid, theta, model)
    s_env = squeeze_minmax(grid, model)[0]
    meta = regime_metadata(grid, model)
    meta["x_c"] = x_c
    return SpectrumResult(
        grid=grid,
        omega=grid * model.gamma0,
        channels={
            "s_theta": s_fixed,
            "s_envelope": s_env,
            "theta_used": np.full(grid.shape, theta),
            "s_db": to_db(s_fixed),
        },
        theta=theta,
        normalization="single-sided, vacuum = 1",
        metadata=meta,
    )


def low_freq_limit(g: float) -> float:
    """Best squeezing far below the spring resonance,
    (sqrt(1+g^2) - 1)/(sqrt(1+g^2) + 1) ~ g^2/4."""
    if not g > 0:
        raise ValueError("g must be positive")
    root = math.sqrt(1.0 + g * g)
    return g * g / (root + 1.0) ** 2


def dispersive_reference(detuning_ratio: float) -> float:
    """Low-frequency squeezing of a detuned purely dispersive cavity, (Delta/gamma0)^2."""
    return detuning_ratio * detuning_ratio


def to_db(s):
    """10 log10(S); negative values mean squeezing."""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(s)
