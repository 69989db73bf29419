"""Run configuration: a sectioned key = value text file.

Every key is optional; omitted keys take the defaults below. Unknown
sections or keys are rejected with an error naming them.

[cavity]
    length_m        = 1.0       cavity length L [m]
    t0              = 0.01      mean transmittance (beam-splitter variant)
    pump_freq_thz   = 300       pump frequency w0 / 2 pi [THz]
    mass_kg         = 0.05      test mass [kg]
    input_power_w   = 0.042     input power I0 [W]

[coupling]
    mode            = bs        bs | mirror | direct | ratio
    xi_per_m, eta_per_m, gamma0_per_s    direct mode: xi, eta [1/m], gamma0 [1/s]
    r_m, t_m, t1                         mirror mode: mirror amplitudes and T1
    x0, g                                ratio mode: spring frequency and coupling ratio
                                         (gamma0 and D take the laboratory values)

[sweep]
    x_min, x_max    = x0/30, 30 x0      dimensionless band
    points          = 2000
    scale           = log       log | lin

[homodyne]
    mode            = fixed     fixed | extremal_a | extremal_phi | optimal
    theta_rad       = 0.0       angle for the fixed mode
    x_c             = x0        tuning frequency for the extremal modes and squeezing

[oracle]
    dt              = 0.05      step in units of 1/gamma0
    duration        = 64000     segment length in units of 1/gamma0
    segments        = 256
    seed            = 0
    gamma_m_rel     = 0.1       intrinsic damping gamma_m / Omega0
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from importlib import resources

from .errors import ConfigError
from .force_sensing import HomodyneMode, HomodyneSetting
from .langevin import OracleConfig
from .model_params import (
    DimensionlessModel,
    MsiGeometry,
    PhysicalParams,
    Variant,
    derive_coupling,
    CouplingCoefficients,
    reduce,
)
from .spectrum import default_grid, make_grid

_FLOAT, _INT, _STR = float, int, str

SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "cavity": {
        "length_m": (_FLOAT, 1.0),
        "t0": (_FLOAT, 0.01),
        "pump_freq_thz": (_FLOAT, 300.0),
        "mass_kg": (_FLOAT, 0.05),
        "input_power_w": (_FLOAT, 0.042),
    },
    "coupling": {
        "mode": (_STR, "bs"),
        "xi_per_m": (_FLOAT, None),
        "eta_per_m": (_FLOAT, None),
        "gamma0_per_s": (_FLOAT, None),
        "r_m": (_FLOAT, None),
        "t_m": (_FLOAT, None),
        "t1": (_FLOAT, None),
        "x0": (_FLOAT, None),
        "g": (_FLOAT, None),
    },
    "sweep": {
        "x_min": (_FLOAT, None),
        "x_max": (_FLOAT, None),
        "points": (_INT, 2000),
        "scale": (_STR, "log"),
    },
    "homodyne": {
        "mode": (_STR, "fixed"),
        "theta_rad": (_FLOAT, 0.0),
        "x_c": (_FLOAT, None),
    },
    "oracle": {
        "dt": (_FLOAT, 0.05),
        "duration": (_FLOAT, 64000.0),
        "segments": (_INT, 256),
        "seed": (_INT, 0),
        "gamma_m_rel": (_FLOAT, 0.1),
    },
}

CHOICES = {
    ("coupling", "mode"): ("bs", "mirror", "direct", "ratio"),
    ("sweep", "scale"): ("log", "lin"),
    ("homodyne", "mode"): tuple(m.value for m in HomodyneMode),
}

POSITIVE = {
    ("cavity", "length_m"), ("cavity", "pump_freq_thz"), ("cavity", "mass_kg"),
    ("cavity", "input_power_w"), ("cavity", "t0"), ("coupling", "gamma0_per_s"),
    ("coupling", "x0"), ("coupling", "g"), ("sweep", "x_min"), ("sweep", "x_max"),
    ("sweep", "points"), ("homodyne", "x_c"), ("oracle", "dt"), ("oracle", "duration"),
    ("oracle", "segments"),
}


@dataclass
class RunConfig:
    values: dict[str, dict[str, object]]
    source: str = "<defaults>"
    explicit: set = field(default_factory=set)

    def get(self, section: str, key: str):
        return self.values[section][key]


def _convert(section: str, key: str, raw: str, where: str):
    kind, _ = SCHEMA[section][key]
    text = raw.strip()
    try:
        value = kind(text)
    except ValueError:
        raise ConfigError(f"{where}: [{section}] {key} = {raw!r} is not a valid {kind.__name__}") from None
    if kind is float and not math.isfinite(value):
        raise ConfigError(f"{where}: [{section}] {key} must be finite")
    choices = CHOICES.get((section, key))
    if choices is not None and value not in choices:
        raise ConfigError(f"{where}: [{section}] {key} = {text!r}; expected one of {', '.join(choices)}")
    if (section, key) in POSITIVE and not value > 0:
        raise ConfigError(f"{where}: [{section}] {key} must be positive, got {value}")
    return value


def _check_known(section: str, key: str, where: str):
    if section not in SCHEMA:
        raise ConfigError(f"{where}: unknown section [{section}]")
    if key not in SCHEMA[section]:
        raise ConfigError(f"{where}: unknown key {key!r} in [{section}]")


def parse_config(text: str, source: str = "<string>", overrides=()) -> RunConfig:
    """Parse a config document, then apply ``section.key=value`` overrides."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    values = {s: {k: default for k, (_, default) in keys.items()} for s, keys in SCHEMA.items()}
    explicit = set()
    for section in parser.sections():
        for key, raw in parser.items(section):
            _check_known(section, key, source)
            values[section][key] = _convert(section, key, raw, source)
            explicit.add((section, key))
    for item in overrides:
        name, sep, raw = item.partition("=")
        section, dot, key = name.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"--set {item!r}: expected section.key=value")
        _check_known(section, key, "--set")
        values[section][key] = _convert(section, key, raw, "--set")
        explicit.add((section, key))
    return RunConfig(values=values, source=source, explicit=explicit)


def load_config(path=None, overrides=()) -> RunConfig:
    if path is None:
        return parse_config("", "<defaults>", overrides)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path), overrides)


def bundled_config_text(name: str = "table1.cfg") -> str:
    return resources.files("optospring").joinpath("data", name).read_text(encoding="utf-8")


def _need(cfg: RunConfig, section: str, *keys: str):
    missing = [k for k in keys if cfg.get(section, k) is None]
    if missing:
        mode = cfg.get("coupling", "mode")
        raise ConfigError(f"[{section}] mode {mode} needs {', '.join(missing)}")
    return [cfg.get(section, k) for k in keys]


def build_geometry(cfg: RunConfig) -> MsiGeometry:
    mode = cfg.get("coupling", "mode")
    common = dict(
        cavity_length=cfg.get("cavity", "length_m"),
        pump_angular_frequency=2.0 * math.pi * cfg.get("cavity", "pump_freq_thz") * 1e12,
    )
    if mode == "bs":
        return MsiGeometry(Variant.MOVABLE_BEAM_SPLITTER, mean_transmittance=cfg.get("cavity", "t0"), **common)
    if mode == "mirror":
        r_m, t_m, t1 = _need(cfg, "coupling", "r_m", "t_m", "t1")
        return MsiGeometry(Variant.MOVABLE_MIRROR, mean_transmittance=t1,
                           mirror_reflectivity=r_m, mirror_transmittance=t_m, **common)
    raise ConfigError(f"coupling mode {mode} has no interferometer geometry")


def build_coupling(cfg: RunConfig) -> CouplingCoefficients:
    mode = cfg.get("coupling", "mode")
    if mode == "direct":
        xi, eta, gamma0 = _need(cfg, "coupling", "xi_per_m", "eta_per_m", "gamma0_per_s")
        return CouplingCoefficients(gamma0, xi, eta)
    return derive_coupling(build_geometry(cfg))


def build_physical(cfg: RunConfig) -> PhysicalParams:
    if cfg.get("coupling", "mode") == "ratio":
        raise ConfigError("coupling mode ratio defines no physical parameters")
    return PhysicalParams.from_coupling(
        build_coupling(cfg),
        mass=cfg.get("cavity", "mass_kg"),
        input_power=cfg.get("cavity", "input_power_w"),
        pump_angular_frequency=2.0 * math.pi * cfg.get("cavity", "pump_freq_thz") * 1e12,
    )


def build_model(cfg: RunConfig) -> DimensionlessModel:
    if cfg.get("coupling", "mode") == "ratio":
        x0, g = _need(cfg, "coupling", "x0", "g")
        return DimensionlessModel.from_ratio(x0, g)
    params = build_physical(cfg)
    if params.dispersive_coeff == 0 and params.dissipative_coeff == 0:
        return DimensionlessModel.uncoupled(params.half_bandwidth)
    return reduce(params)


def build_grid(cfg: RunConfig, model: DimensionlessModel):
    x_min, x_max = cfg.get("sweep", "x_min"), cfg.get("sweep", "x_max")
    points, scale = cfg.get("sweep", "points"), cfg.get("sweep", "scale")
    if x_min is None or x_max is None:
        if model.x0 <= 0:
            raise ConfigError("[sweep] x_min and x_max are required when there is no optical spring")
        lo, hi = default_grid(model, points=2)
        x_min = lo if x_min is None else x_min
        x_max = hi if x_max is None else x_max
    return make_grid(x_min, x_max, points, scale)


def build_homodyne(cfg: RunConfig) -> HomodyneSetting:
    return HomodyneSetting(
        theta=cfg.get("homodyne", "theta_rad"),
        mode=HomodyneMode(cfg.get("homodyne", "mode")),
        x_c=cfg.get("homodyne", "x_c"),
    )


def build_oracle(cfg: RunConfig) -> OracleConfig:
    seed = cfg.get("oracle", "seed")
    if not 0 <= seed < 2 ** 64:
        raise ConfigError(f"[oracle] seed must fit in 64 bits, got {seed}")
    return OracleConfig(
        dt=cfg.get("oracle", "dt"),
        duration=cfg.get("oracle", "duration"),
        segments=cfg.get("oracle", "segments"),
        seed=seed,
        gamma_m_rel=cfg.get("oracle", "gamma_m_rel"),
    )
