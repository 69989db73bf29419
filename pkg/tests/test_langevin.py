import csv
import math

import numpy as np
import pytest
from scipy import linalg

from optospring import langevin
from optospring.errors import DomainError, EstimatorError, InstabilityError, TransientError
from optospring.langevin import (
    OracleConfig,
    compare_with_analytic,
    damping_of,
    estimate_output_psd,
    harmonic_transfer_check,
    simulate_ensemble,
    simulate_trajectory,
    state_space,
    write_trace_csv,
    zoh_step,
)
from optospring.model_params import DimensionlessModel, PhysicalParams, reduce
from optospring.rigidity import dimensionless_susceptibility

HALF_PI = math.pi / 2


@pytest.fixture(scope="module")
def weak():
    return DimensionlessModel.from_ratio(0.05, 0.2)


@pytest.fixture(scope="module")
def vacuum_trace():
    cfg = OracleConfig(duration=2000.0, segments=64, seed=11)
    return simulate_ensemble(DimensionlessModel.uncoupled(), cfg)


class TestConfig:
    @pytest.mark.parametrize("kwargs", [
        dict(dt=0.06), dict(dt=0.0), dict(segments=8), dict(gamma_m_rel=-0.1),
        dict(record_stride=0), dict(seed=-1), dict(seed=2 ** 64),
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(DomainError):
            OracleConfig(**kwargs)

    def test_steps_multiple_of_stride(self):
        cfg = OracleConfig(duration=1000.33)
        assert cfg.steps % cfg.record_stride == 0
        assert cfg.record_dt == pytest.approx(1.0)

    def test_refuses_antidamped_spring(self):
        lab = reduce(PhysicalParams.laboratory())
        with pytest.raises(DomainError, match="gamma_m_rel"):
            simulate_ensemble(lab, OracleConfig(duration=2000.0, gamma_m_rel=0.0))

    def test_refuses_short_duration(self, weak):
        with pytest.raises(DomainError, match="50/x0"):
            simulate_ensemble(weak, OracleConfig(duration=500.0, gamma_m_rel=0.1))


class TestDiscretization:
    def test_zoh_matches_expm(self, weak):
        m, b, _, _ = state_space(weak, 0.005)
        phi, gamma, _, _ = zoh_step(weak, 0.005, 0.05)
        np.testing.assert_allclose(phi, linalg.expm(m * 0.05), rtol=1e-12, atol=1e-15)
        # Gamma = int_0^dt e^{Ms} ds B, by fine trapezoid quadrature
        s = np.linspace(0, 0.05, 2001)
        integrand = np.array([linalg.expm(m * v) @ b for v in s])
        np.testing.assert_allclose(gamma, np.trapezoid(integrand, s, axis=0), rtol=1e-6, atol=1e-12)

    def test_damping_scale(self, weak):
        assert damping_of(weak, OracleConfig(gamma_m_rel=0.1)) == pytest.approx(0.005)


class TestDeterminism:
    def test_same_seed_bit_identical(self, weak):
        cfg = OracleConfig(duration=1000.0, gamma_m_rel=1.0, seed=3)
        a = simulate_ensemble(weak, cfg).channels["a1a"]
        b = simulate_ensemble(weak, cfg).channels["a1a"]
        assert np.array_equal(a, b)

    def test_independent_of_threads_and_batching(self, weak, monkeypatch):
        cfg = OracleConfig(duration=1000.0, segments=80, gamma_m_rel=1.0, seed=5)
        monkeypatch.setenv("OPTOSPRING_THREADS", "1")
        serial = simulate_ensemble(weak, cfg).channels["a1phi"]
        monkeypatch.setenv("OPTOSPRING_THREADS", "4")
        threaded = simulate_ensemble(weak, cfg).channels["a1phi"]
        assert np.array_equal(serial, threaded)
        same_batch = simulate_ensemble(weak, cfg, segments=range(64, 80)).channels["a1phi"][6]
        assert np.array_equal(same_batch, serial[70])
        # a different batch width only changes BLAS rounding
        alone = simulate_ensemble(weak, cfg, segments=[70]).channels["a1phi"][0]
        np.testing.assert_allclose(alone, serial[70], rtol=0, atol=1e-12 * np.max(np.abs(alone)))

    def test_seed_changes_noise(self, weak):
        a = simulate_ensemble(weak, OracleConfig(duration=1000.0, gamma_m_rel=1.0, seed=1))
        b = simulate_ensemble(weak, OracleConfig(duration=1000.0, gamma_m_rel=1.0, seed=2))
        assert not np.allclose(a.channels["a1a"], b.channels["a1a"])


class TestVacuum:
    def test_white_at_one(self, vacuum_trace):
        est = estimate_output_psd(vacuum_trace, 0.7)
        z = (est["s_theta"] - 1.0) / est["stderr"]
        assert np.mean(np.abs(z) < 3) >= 0.98
        assert abs(np.mean(est["s_theta"]) - 1.0) < 3 * np.sqrt(np.mean(est["stderr"] ** 2) / z.size)

    def test_stderr_scales_with_segments(self):
        cfg = OracleConfig(duration=500.0, segments=256, seed=9)
        trace = simulate_ensemble(DimensionlessModel.uncoupled(), cfg)
        full = estimate_output_psd(trace, 0.0)["stderr"]
        sub = langevin.TimeTrace(trace.dt, trace.t, {k: v[:16] for k, v in trace.channels.items()})
        part = estimate_output_psd(sub, 0.0)["stderr"]
        assert np.mean(part) / np.mean(full) == pytest.approx(4.0, rel=0.15)

    def test_estimator_needs_segments(self):
        trace = simulate_ensemble(DimensionlessModel.uncoupled(), OracleConfig(duration=200.0),
                                  segments=range(8))
        with pytest.raises(EstimatorError):
            estimate_output_psd(trace, 0.0)


class TestHarmonic:
    @pytest.mark.parametrize("frac, theta", [(2.0, 0.0), (0.5, HALF_PI)])
    def test_off_resonance(self, weak, frac, theta):
        cfg = OracleConfig(duration=2000.0, gamma_m_rel=0.1)
        assert harmonic_transfer_check(weak, frac * weak.x0, theta, cfg).relative_error <= 0.01

    def test_on_resonance_regularized(self, weak):
        cfg = OracleConfig(duration=2000.0, gamma_m_rel=1.0)
        assert harmonic_transfer_check(weak, weak.x0, 0.0, cfg).relative_error <= 0.02

    def test_marginal_resonance_flags_transient(self, weak):
        cfg = OracleConfig(duration=2000.0, gamma_m_rel=0.1)
        with pytest.raises(TransientError):
            harmonic_transfer_check(weak, weak.x0, 0.0, cfg)

    def test_displacement_follows_susceptibility(self, weak):
        cfg = OracleConfig(duration=2000.0, gamma_m_rel=1.0)
        x = 1.5 * weak.x0
        res = harmonic_transfer_check(weak, x, 0.0, cfg)
        chi = dimensionless_susceptibility(x, weak, damping_of(weak, cfg), exact=True)
        assert abs(res.displacement_gain / chi - 1) < 1e-3

    def test_free_mass(self):
        free = DimensionlessModel.uncoupled()
        cfg = OracleConfig(duration=2000.0)
        low = harmonic_transfer_check(free, 0.1, 0.0, cfg).displacement_gain
        high = harmonic_transfer_check(free, 0.2, 0.0, cfg).displacement_gain
        assert abs(high / low) == pytest.approx(0.25, rel=0.05)

    def test_finer_step_agrees(self, weak):
        cfg = OracleConfig(dt=0.025, record_stride=40, duration=2000.0, gamma_m_rel=0.1)
        assert harmonic_transfer_check(weak, 2 * weak.x0, 0.0, cfg).relative_error <= 0.01


class TestStability:
    def test_lab_bounded_with_damping(self):
        lab = reduce(PhysicalParams.laboratory())
        trace = simulate_ensemble(lab, OracleConfig(duration=5000.0, gamma_m_rel=0.1))
        assert all(np.all(np.isfinite(v)) for v in trace.channels.values())

    def test_growth_detected(self, weak):
        with pytest.raises(InstabilityError):
            simulate_ensemble(weak, OracleConfig(duration=8000.0, gamma_m_rel=0.001))


class TestSpectrumAgreement:
    def test_damped_spring_matches_analytic(self, weak):
        cfg = OracleConfig(duration=2000.0, segments=64, gamma_m_rel=1.0, seed=4)
        est, ref, mask, _ = compare_with_analytic(weak, cfg, 0.0)
        z = (est["s_theta"][mask] - ref) / est["stderr"][mask]
        assert mask.sum() > 20
        assert np.mean(np.abs(z) < 3) >= 0.9


def test_trace_csv(tmp_path, weak):
    tr = simulate_trajectory(weak, OracleConfig(duration=1000.0, gamma_m_rel=1.0))
    path = tmp_path / "trace.csv"
    write_trace_csv(tr, path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == langevin.TRACE_HEADER
    assert len(rows) == tr.t.size + 1
    assert float(rows[2][0]) == pytest.approx(tr.t[1])
    assert b"\r" not in path.read_bytes()
