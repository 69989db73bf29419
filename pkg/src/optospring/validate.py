"""Self-check suite behind ``optospring validate``.

Each check is cheap (the whole suite runs in well under a minute) and
returns a named pass/fail record. ``perturb`` temporarily overrides module
constants, which lets tests confirm that a wrong constant is caught.
"""

from __future__ import annotations

import contextlib
import importlib
import math
import time
from dataclasses import dataclass

import numpy as np

from . import force_sensing as fs
from . import langevin
from . import model_params as mp
from . import squeezing as sq

LAB_GAMMA0 = 15000.0
LAB_XI = -0.71
LAB_ETA = 1.78e9
CHECK_SEED = 20240611


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


@contextlib.contextmanager
def perturbed(overrides: dict[str, float] | None):
    """Temporarily set ``module.NAME`` attributes inside the package."""
    saved = []
    try:
        for dotted, value in (overrides or {}).items():
            mod_name, _, attr = dotted.rpartition(".")
            module = importlib.import_module(f"optospring.{mod_name}")
            if not hasattr(module, attr):
                raise KeyError(f"no constant {dotted}")
            saved.append((module, attr, getattr(module, attr)))
            setattr(module, attr, value)
        yield
    finally:
        for module, attr, value in reversed(saved):
            setattr(module, attr, value)


def _rel(a, b):
    return abs(a / b - 1.0)


def check_lab_coupling():
    c = mp.derive_bs_coupling(mp.MsiGeometry.laboratory())
    errs = [_rel(c.half_bandwidth, LAB_GAMMA0), _rel(c.dispersive_coeff, LAB_XI),
            _rel(c.dissipative_coeff, LAB_ETA)]
    return max(errs) <= 0.01, f"gamma0={c.half_bandwidth:.6g} xi={c.dispersive_coeff:.6g} eta={c.dissipative_coeff:.6g}"


def check_ratio_identity(rng):
    worst = 0.0
    for _ in range(1000):
        t0 = rng.uniform(1e-4, 0.29)
        geom = mp.MsiGeometry(mp.Variant.MOVABLE_BEAM_SPLITTER, cavity_length=rng.uniform(0.01, 10.0),
                              pump_angular_frequency=rng.uniform(1e14, 1e16), mean_transmittance=t0)
        g = mp.coupling_ratio(mp.derive_bs_coupling(geom), geom.pump_angular_frequency)
        worst = max(worst, _rel(g, t0))
    return worst <= 1e-9, f"max |g/T0 - 1| = {worst:.2e}"


def check_lab_spring():
    model = mp.reduce(mp.PhysicalParams.laboratory())
    return _rel(model.x0, 0.05) <= 0.02, f"x0 = {model.x0:.6g}, g = {model.coupling_ratio:.6g}"


def random_model(rng) -> mp.DimensionlessModel:
    """x0 in [1e-3, 0.1], g in [1e-2, 1e2], both log-uniform."""
    return mp.DimensionlessModel.from_ratio(10 ** rng.uniform(-3, -1), 10 ** rng.uniform(-2, 2))


def check_resonance_minima(rng):
    worst = 0.0
    for _ in range(1000):
        m = random_model(rng)
        s0 = fs.force_noise_psd(m.x0, 0.0, m)[0]
        s90 = fs.force_noise_psd(m.x0, math.pi / 2, m)[0]
        a, b = fs.resonance_minima_ratio_form(m)
        worst = max(worst, _rel(s0, a), _rel(s90, b), _rel(s0, m.p_m / 2))
    return worst <= 1e-12, f"max relative error {worst:.2e}"


def check_uncertainty_product(rng):
    worst = 0.0
    for _ in range(100):
        m = random_model(rng)
        grid = np.geomspace(m.x0 / 30, m.x0 * 30, 2000)
        prod = sq.squeeze_minmax(grid, m)[2]
        worst = max(worst, float(np.max(np.abs(prod - 1.0))))
    return worst <= 1e-9, f"max |Smin Smax - 1| = {worst:.2e}"


def check_low_frequency():
    m = mp.DimensionlessModel.from_ratio(0.05, 0.2)
    s = sq.squeeze_minmax(1e-3 * m.x0, m)[0]
    target = sq.low_freq_limit(0.2)
    ok = _rel(s, target) <= 1e-3
    for g in (0.1, 0.05, 0.01):
        ok &= _rel(sq.low_freq_limit(g), g * g / 4) <= 0.02
    return ok, f"S = {s:.8g}, limit = {target:.8g}"


def check_sql_band():
    m = mp.DimensionlessModel.from_ratio(0.05, 20.0)
    grid = np.geomspace(m.x0 / 30, m.x0 * 30, 2000)
    bands = [b for b in fs.sql_crossings(m, 0.0, grid) if b[0] < m.x0 < b[1]]
    if not bands:
        return False, "no S_f < 1 interval around x0"
    width = (bands[0][1] - bands[0][0]) / m.x0
    return 0.3 <= width <= 0.7, f"width = {width:.4f} x0"


def check_vacuum():
    cfg = langevin.OracleConfig(duration=2000.0, segments=64, seed=CHECK_SEED)
    trace = langevin.simulate_ensemble(mp.DimensionlessModel.uncoupled(), cfg)
    est = langevin.estimate_output_psd(trace, 0.4)
    z = (est["s_theta"] - 1.0) / est["stderr"]
    frac = float(np.mean(np.abs(z) < 3.0))
    mean = float(np.mean(est["s_theta"]))
    band = 3.0 * float(np.sqrt(np.mean(est["stderr"] ** 2) / z.size))
    return frac >= 0.98 and abs(mean - 1) < band, (
        f"mean PSD {mean:.4f} (band {band:.4f}), {frac:.1%} of bins within 3 SE"
    )


def check_harmonic():
    m = mp.DimensionlessModel.from_ratio(0.05, 0.2)
    cfg = langevin.OracleConfig(duration=2000.0, gamma_m_rel=0.1)
    worst = max(langevin.harmonic_transfer_check(m, x, th, cfg).relative_error
                for x, th in ((2 * m.x0, 0.0), (0.5 * m.x0, math.pi / 2)))
    return worst <= 0.01, f"max relative gain error {worst:.2e}"


def run_checks(perturb: dict[str, float] | None = None) -> list[CheckResult]:
    rng = np.random.default_rng(CHECK_SEED)
    checks = [
        ("lab_coupling", check_lab_coupling),
        ("ratio_identity", lambda: check_ratio_identity(rng)),
        ("lab_spring", check_lab_spring),
        ("resonance_minima", lambda: check_resonance_minima(rng)),
        ("uncertainty_product", lambda: check_uncertainty_product(rng)),
        ("low_frequency_squeezing", check_low_frequency),
        ("sql_band", check_sql_band),
        ("oracle_vacuum", check_vacuum),
        ("oracle_harmonic", check_harmonic),
    ]
    results = []
    with perturbed(perturb):
        for name, func in checks:
            start = time.perf_counter()
            try:
                ok, detail = func()
            except Exception as exc:  # a crash is a failed check, reported by name
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            results.append(CheckResult(name, bool(ok), detail, time.perf_counter() - start))
    return results
