"""Linearized quantum-noise model of a Fabry-Perot cavity whose test mass
has both dispersive and dissipative optomechanical coupling."""

from .errors import (
    AngleIndifferentError,
    BandwidthUndefinedError,
    ConfigError,
    DegenerateModelError,
    DomainError,
    EstimatorError,
    InstabilityError,
    NoSpringError,
    OptospringError,
    PureCouplingError,
    RegimeWarning,
    SingularityError,
    TransientError,
    VariantMismatchError,
)
from .force_sensing import (
    BandwidthResult,
    HomodyneMode,
    HomodyneSetting,
    detection_bandwidth,
    extremal_angles,
    force_noise_psd,
    force_spectrum,
    optimal_angle,
    quadrature_transfer,
    resonance_minima,
    sql_crossings,
)
from .langevin import (
    OracleConfig,
    Sinusoid,
    TimeTrace,
    estimate_output_psd,
    harmonic_transfer_check,
    simulate_ensemble,
    simulate_trajectory,
)
from .model_params import (
    CouplingCoefficients,
    DimensionlessModel,
    MsiGeometry,
    PhysicalParams,
    Variant,
    derive_coupling,
    reduce,
)
from .rigidity import (
    SpringConstants,
    StabilityClass,
    effective_susceptibility,
    optical_rigidity,
    spring_constants,
    stability_class,
)
from .spectrum import SpectrumResult, default_grid
from .squeezing import (
    low_freq_limit,
    optimal_angle_at,
    optimal_psd_curve,
    output_quadrature_psd,
    squeeze_minmax,
    wuv,
)

__version__ = "0.1.0"
