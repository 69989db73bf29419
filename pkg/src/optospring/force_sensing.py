"""Homodyne force sensing with combined coupling.

Noise is referred to the signal force normalized to the standard quantum
limit, so S_f = 1 is the SQL. Angles are carried as theta itself (never
tan theta); theta = pi/2 is an ordinary value.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import BandwidthUndefinedError, DomainError, NoSpringError, SingularityError
from .model_params import DimensionlessModel
from .rigidity import dimensionless_susceptibility
from .spectrum import SpectrumResult, check_grid, regime_metadata

BISECT_MAXITER = 80
BISECT_RTOL = 1e-12
SCAN_PER_DECADE = 256


class HomodyneMode(enum.Enum):
    FIXED = "fixed"
    EXTREMAL_A = "extremal_a"
    EXTREMAL_PHI = "extremal_phi"
    OPTIMAL = "optimal"


@dataclass(frozen=True)
class HomodyneSetting:
    theta: float = 0.0
    mode: HomodyneMode = HomodyneMode.FIXED
    x_c: float | None = None


@dataclass(frozen=True)
class BandwidthResult:
    gamma: float  # rad/s
    ratio: float  # Gamma / Omega0
    x_min: float
    s_min: float
    x_lo: float
    x_hi: float


def _coupling_amplitudes(model: DimensionlessModel) -> tuple[float, float]:
    eps_a = model.dissipative_sign * math.sqrt(model.p_m) / 2.0
    eps_phi = model.dispersive_sign * math.sqrt(model.q_m_d2) / 2.0
    return eps_a, eps_phi


def _check_x(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise SingularityError("x must be > 0: the signal gain vanishes at x = 0 (free mass)")
    return x


def quadrature_transfer(x, theta, model: DimensionlessModel, *, damping: float = 0.0,
                        exact: bool = False):
    """Linear map from (a_a, a_phi, f_s) to the detected quadrature a_theta.

    Returns the complex gains ``(gain_a, gain_phi, gain_f)``. The default
    form is the small-frequency one; ``exact=True`` keeps the full cavity
    filter 1/(1/2 - ix). ``damping`` is gamma_m/gamma0.
    """
    x = _check_x(x)
    theta = np.asarray(theta, dtype=float)
    eps_a, eps_phi = _coupling_amplitudes(model)
    if exact:
        lor = 2.0 / (1.0 - 2j * x)
        passthrough = lor - 1.0
        amp_out = 1.0 - lor / 2.0
        ba_phi = (2.0 - lor) / 2.0
    else:
        lor = 2.0
        passthrough = 1.0
        amp_out = -2j * x
        ba_phi = -2j * x
    chi = dimensionless_susceptibility(x, model, damping, exact=exact)
    c, s = np.cos(theta), np.sin(theta)
    readout = (eps_a * amp_out * c - eps_phi * lor * s) * chi
    gain_a = passthrough * c - readout * eps_phi * lor
    gain_phi = passthrough * s + readout * eps_a * ba_phi
    gain_f = readout * math.sqrt(2.0) * x
    return gain_a, gain_phi, gain_f


def force_noise_psd(x, theta, model: DimensionlessModel, *, damping: float = 0.0,
                    exact: bool = False):
    """Force-referred noise PSD (S_f, S_a1, S_phi1), with S_f = S_a1 + S_phi1.

    Without damping and in the small-frequency form this is the closed
    expression written in cos/sin of the homodyne angle::

        S_a1   = (c (x0^2 - x^2) + Qm D^2 s)^2 / (2 x^2 (x^2 Pm c^2 + Qm D^2 s^2))
        S_phi1 = (s (x0^2 - x^2) - Pm x^2 c)^2 / (2 x^2 (x^2 Pm c^2 + Qm D^2 s^2))

    Otherwise the PSDs are built from :func:`quadrature_transfer`.
    """
    x = _check_x(x)
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if damping == 0.0 and not exact and model.spring_sign >= 0:
            c, s = np.cos(theta), np.sin(theta)
            detune = model.x0 ** 2 - x * x
            b = model.q_m_d2
            den = 2.0 * x * x * (x * x * model.p_m * c * c + b * s * s)
            s_a1 = (c * detune + b * s) ** 2 / den
            s_phi1 = (s * detune - model.p_m * x * x * c) ** 2 / den
        else:
            gain_a, gain_phi, gain_f = quadrature_transfer(
                x, theta, model, damping=damping, exact=exact
            )
            sig = np.abs(gain_f) ** 2
            s_a1 = np.abs(gain_a) ** 2 / sig
            s_phi1 = np.abs(gain_phi) ** 2 / sig
    return s_a1 + s_phi1, s_a1, s_phi1


def extremal_angles(x_c, model: DimensionlessModel):
    """Angles at which one quadrature's contribution to S_f vanishes at x_c.

    tan(theta1) = -(x0^2 - x_c^2) / (Qm D^2), tan(theta2) = Pm x_c^2 / (x0^2 - x_c^2);
    both returned in [0, pi).
    """
    x_c = _check_x(x_c)
    detune = model.x0 ** 2 - x_c * x_c
    theta1 = np.arctan2(-detune, model.q_m_d2) % np.pi + 0.0
    theta2 = np.arctan2(model.p_m * x_c * x_c, detune) % np.pi + 0.0
    if theta1.ndim == 0:
        return float(theta1), float(theta2)
    return theta1, theta2


def optimal_angle(x, model: DimensionlessModel, **kwargs):
    """Per-frequency homodyne angle minimizing S_f (the better extremal angle)."""
    theta1, theta2 = extremal_angles(x, model)
    s1 = force_noise_psd(x, theta1, model, **kwargs)[0]
    s2 = force_noise_psd(x, theta2, model, **kwargs)[0]
    return np.where(s1 <= s2, theta1, theta2)


def resonance_minima(model: DimensionlessModel) -> tuple[float, float]:
    """S_f at x = x0 for theta = 0 and theta = pi/2: (Pm/2, Qm D^2 / (2 x0^2))."""
    if model.x0 <= 0:
        raise NoSpringError("resonance minima need x0 > 0")
    return model.p_m / 2.0, model.q_m_d2 / (2.0 * model.x0 ** 2)


def resonance_minima_ratio_form(model: DimensionlessModel) -> tuple[float, float]:
    """The same two minima written as (x0^2 g, 1/g)."""
    if model.x0 <= 0:
        raise NoSpringError("resonance minima need x0 > 0")
    g = model.coupling_ratio
    return model.x0 ** 2 * g, 1.0 / g


def _bisect(func, a: float, b: float, rtol: float = BISECT_RTOL) -> float:
    return optimize.bisect(func, a, b, rtol=rtol, xtol=1e-300, maxiter=BISECT_MAXITER,
                           disp=False)


def _scan_grid(x_lo: float, x_hi: float) -> np.ndarray:
    decades = math.log10(x_hi / x_lo)
    return np.geomspace(x_lo, x_hi, max(int(math.ceil(decades * SCAN_PER_DECADE)) + 1, 3))


def detection_bandwidth(model: DimensionlessModel, theta: float, **kwargs) -> BandwidthResult:
    """Width of the band around the spring resonance where S_f <= 2 S_f^min.

    The minimum is located on a geometric scan of [x0/10, 10 x0] and refined;
    the two crossings of 2 S_f^min are then bisected on either side.
    """
    if model.x0 <= 0:
        raise NoSpringError("detection bandwidth needs x0 > 0")
    lo, hi = model.x0 / 10.0, model.x0 * 10.0
    xs = _scan_grid(lo, hi)

    def s_f(x):
        return float(force_noise_psd(x, theta, model, **kwargs)[0])

    values = force_noise_psd(xs, theta, model, **kwargs)[0]
    i = int(np.nanargmin(values))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, xs.size - 1)]
    res = optimize.minimize_scalar(s_f, bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-15 * model.x0})
    x_min, s_min = float(res.x), float(res.fun)
    if values[i] < s_min:
        x_min, s_min = float(xs[i]), float(values[i])
    level = 2.0 * s_min

    def excess(x):
        return s_f(x) - level

    above = values > level
    left = np.nonzero(above & (xs < x_min))[0]
    right = np.nonzero(above & (xs > x_min))[0]
    if left.size == 0 or right.size == 0:
        raise BandwidthUndefinedError(
            f"S_f does not rise to 2 S_min = {level:.3g} on both sides within [x0/10, 10 x0]"
        )
    x_lo = _bisect(excess, xs[left[-1]], x_min)
    x_hi = _bisect(excess, x_min, xs[right[0]])
    width = x_hi - x_lo
    return BandwidthResult(
        gamma=width * model.gamma0,
        ratio=width / model.x0,
        x_min=x_min,
        s_min=s_min,
        x_lo=x_lo,
        x_hi=x_hi,
    )


def sql_crossings(model: DimensionlessModel, theta: float, grid, *, rtol: float = 1e-6,
                  **kwargs) -> list[tuple[float, float]]:
    """Maximal x-intervals of the grid span on which S_f < 1.

    Interval ends are located by bisection on sign changes of S_f - 1; an
    interval touching the grid edge is clipped to it.
    """
    grid = check_grid(grid)
    values = force_noise_psd(grid, theta, model, **kwargs)[0]
    below = values < 1.0

    def excess(x):
        return float(force_noise_psd(x, theta, model, **kwargs)[0]) - 1.0

    intervals = []
    start = grid[0] if below[0] else None
    for i in range(1, grid.size):
        if below[i] == below[i - 1]:
            continue
        edge = _bisect(excess, grid[i - 1], grid[i], rtol=rtol)
        if below[i]:
            start = edge
        else:
            intervals.append((start, edge))
            start = None
    if start is not None:
        intervals.append((start, float(grid[-1])))
    return [(float(a), float(b)) for a, b in intervals]


def resolve_angle(setting: HomodyneSetting, grid: np.ndarray, model: DimensionlessModel,
                  **kwargs) -> np.ndarray:
    """Homodyne angle to use at every grid point for a given setting."""
    mode = setting.mode
    if mode is HomodyneMode.FIXED:
        return np.full(grid.shape, float(setting.theta))
    if mode is HomodyneMode.OPTIMAL:
        return np.asarray(optimal_angle(grid, model, **kwargs), dtype=float)
    x_c = setting.x_c if setting.x_c is not None else model.x0
    if not x_c > 0:
        raise DomainError("extremal homodyne modes need x_c > 0")
    theta1, theta2 = extremal_angles(x_c, model)
    theta = theta1 if mode is HomodyneMode.EXTREMAL_A else theta2
    return np.full(grid.shape, theta)


def force_spectrum(model: DimensionlessModel, grid, setting: HomodyneSetting = HomodyneSetting(),
                   **kwargs) -> SpectrumResult:
    grid = check_grid(grid)
    theta = resolve_angle(setting, grid, model, **kwargs)
    s_f, s_a1, s_phi1 = force_noise_psd(grid, theta, model, **kwargs)
    fixed = None if setting.mode is HomodyneMode.OPTIMAL else float(theta[0])
    meta = regime_metadata(grid, model)
    meta["homodyne_mode"] = setting.mode.value
    return SpectrumResult(
        grid=grid,
        omega=grid * model.gamma0,
        channels={"s_f": s_f, "s_a1": s_a1, "s_phi1": s_phi1, "theta_used": theta},
        theta=fixed,
        metadata=meta,
    )
