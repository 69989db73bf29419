"""Frequency grids and the container returned by every spectral routine."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .model_params import SMALL_X_LIMIT, DimensionlessModel

NORMALIZATION = "single-sided, vacuum = 1, force normalized to SQL f_s"


@dataclass
class SpectrumResult:
    """PSD channels sampled on a dimensionless grid x = Omega / gamma0."""

    grid: np.ndarray
    omega: np.ndarray
    channels: dict[str, np.ndarray]
    theta: float | None = None
    normalization: str = NORMALIZATION
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]


def default_grid(model: DimensionlessModel, points: int = 2000, span: float = 30.0) -> np.ndarray:
    """Logarithmic grid over [x0/span, span*x0]."""
    if model.x0 <= 0:
        raise DomainError("default grid needs x0 > 0; pass an explicit grid")
    return np.geomspace(model.x0 / span, model.x0 * span, points)


def make_grid(x_min: float, x_max: float, points: int, scale: str = "log") -> np.ndarray:
    if not 0 < x_min < x_max:
        raise DomainError(f"need 0 < x_min < x_max, got {x_min}, {x_max}")
    if points < 2:
        raise DomainError("grid needs at least two points")
    if scale == "log":
        return np.geomspace(x_min, x_max, points)
    if scale == "lin":
        return np.linspace(x_min, x_max, points)
    raise DomainError(f"unknown grid scale {scale!r}")


def check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("grid must be a non-empty 1-D sequence")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be positive and strictly increasing")
    return grid


def regime_metadata(grid: np.ndarray, model: DimensionlessModel) -> dict:
    meta = {"x0": model.x0, "g": model.coupling_ratio}
    if grid.size and (grid[-1] > SMALL_X_LIMIT or model.x0 > SMALL_X_LIMIT):
        meta["regime_warning"] = (
            f"grid extends to x = {grid[-1]:.3g}; formulas assume x, x0 << 1 "
            f"(flagged above {SMALL_X_LIMIT})"
        )
    return meta
