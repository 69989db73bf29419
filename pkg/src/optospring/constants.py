"""Physical constants (CODATA 2018 exact/recommended values)."""

#: Speed of light in vacuum [m/s].
SPEED_OF_LIGHT = 2.99792458e8

#: Reduced Planck constant [J s].
HBAR = 1.054571817e-34
