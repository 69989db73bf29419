"""Time-domain stochastic simulation of the linearized cavity.

State (dimensionless time t' = gamma0 t):

    c_a'   = -c_a/2 + n_a - eps_a q / 2
    c_phi' = -c_phi/2 + n_phi - eps_phi q
    q'     = p
    p'     = -eps_phi c_a - (eps_a/2) c_phi + eps_a n_phi - damping p + sqrt(2) x f_s

    a1a   = c_a + eps_a q - n_a
    a1phi = c_phi - n_phi

with eps_a = sign(eta) sqrt(Pm)/2, eps_phi = sign(xi) sqrt(Qm D^2)/2 and
q the displacement in units of sqrt(hbar/(m gamma0)). The input quadratures
n_a, n_phi are white with two-sided intensity 1/2 (vacuum), held constant
over each step of length dt (zero-order hold). Recorded samples are exact
averages over a block of ``record_stride`` steps, so a vacuum input
produces a flat single-sided PSD of exactly one.

The dynamics are linear, so a whole block is advanced at once with its
exact ZOH map. The step noise enters a block only through ten linear
combinations (state increment, block-mean state, block-mean input); these
are drawn jointly from their exact covariance, which is equivalent in
distribution to drawing every step.

Random streams: one Philox generator per segment, keyed by (seed, segment),
read in a fixed order. Results do not depend on how segments are batched
or spread over threads.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, signal

from .errors import DomainError, EstimatorError, InstabilityError, TransientError
from .force_sensing import quadrature_transfer
from .model_params import DimensionlessModel
from .rigidity import StabilityClass, stability_class
from .spectrum import SpectrumResult

CHUNK = 2048  # recording blocks per chunk
BATCH = 64
MODAL_COND_LIMIT = 1e6
DIVERGENCE_FACTOR = 1e6
MIN_SEGMENTS = 16
MAX_DT = 0.05
DISCARD = 0.2
TRACE_HEADER = ("t", "a0a", "a0phi", "y", "a1a", "a1phi")


@dataclass(frozen=True)
class Sinusoid:
    """Signal force f_s(t) = amplitude * cos(x_drive t), amplitude in SQL units."""

    amplitude: float
    x_drive: float


@dataclass(frozen=True)
class OracleConfig:
    dt: float = 0.05
    duration: float = 4000.0
    segments: int = 16
    seed: int = 0
    gamma_m_rel: float = 0.0
    drive: Sinusoid | None = None
    noise: bool = True
    record_stride: int = 20

    def __post_init__(self):
        if not 0 < self.dt <= MAX_DT:
            raise DomainError(f"dt must be in (0, {MAX_DT}], got {self.dt}")
        if self.segments < MIN_SEGMENTS:
            raise DomainError(f"need at least {MIN_SEGMENTS} segments, got {self.segments}")
        if self.gamma_m_rel < 0:
            raise DomainError("gamma_m_rel must be non-negative")
        if self.record_stride < 1:
            raise DomainError("record_stride must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    @property
    def steps(self) -> int:
        n = int(round(self.duration / self.dt))
        return n - n % self.record_stride

    @property
    def record_dt(self) -> float:
        return self.dt * self.record_stride


@dataclass
class TimeTrace:
    """Sampled channels; 1-D per channel for one segment, (segments, samples) for an ensemble.

    Every sample is the average of the channel over one recording interval
    starting at the matching entry of ``t``.
    """

    dt: float
    t: np.ndarray
    channels: dict[str, np.ndarray]
    segments: tuple[int, ...] = ()
    metadata: dict = field(default_factory=dict)

    def quadrature(self, theta: float) -> np.ndarray:
        return self.channels["a1a"] * math.cos(theta) + self.channels["a1phi"] * math.sin(theta)


@dataclass(frozen=True)
class _Blocks:
    """Exact maps over one recording block of ``stride`` ZOH steps.

    With s_b the state at the start of block b:
        s_{b+1}  = power @ s_b + drive_end . f_b + noise[0:4]
        mean s   = avg @ s_b + drive_mean . f_b + noise[4:8]
        mean n   = noise[8:10]
    where f_b are the per-step force values and ``noise`` is Gaussian with
    covariance ``noise_cov`` (the vacuum inputs integrated over the block).
    """

    power: np.ndarray
    avg: np.ndarray
    drive_end: np.ndarray  # (4, stride)
    drive_mean: np.ndarray  # (4, stride)
    noise_root: np.ndarray  # (10, 10)
    avg_state: np.ndarray  # step-averaged state from (state, input)
    avg_input: np.ndarray
    out_c: np.ndarray
    out_d: np.ndarray
    stationary_cov: np.ndarray | None
    modes: tuple | None  # (eigenvalues of power, V) when diagonalizable


def damping_of(model: DimensionlessModel, config: OracleConfig) -> float:
    """gamma_m / gamma0 corresponding to the configured gamma_m / Omega0."""
    return config.gamma_m_rel * model.x0


def state_space(model: DimensionlessModel, damping: float):
    """Continuous-time matrices (M, B, C, D); inputs are (n_a, n_phi, force)."""
    eps_a = model.dissipative_sign * math.sqrt(model.p_m) / 2.0
    eps_phi = model.dispersive_sign * math.sqrt(model.q_m_d2) / 2.0
    m = np.array([
        [-0.5, 0.0, -eps_a / 2.0, 0.0],
        [0.0, -0.5, -eps_phi, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [-eps_phi, -eps_a / 2.0, 0.0, -damping],
    ])
    b = np.array([
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0],
        [0.0, eps_a, 1.0],
    ])
    c = np.array([
        [1.0, 0.0, eps_a, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ])
    d = np.array([
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
    ])
    return m, b, c, d


def zoh_step(model: DimensionlessModel, damping: float, dt: float):
    """Exact one-step ZOH maps (phi, gamma) and the step-average maps.

    Over [t, t + dt] with constant input u: s(t+dt) = phi s + gamma u and
    the time-averaged state is avg_state s + avg_input u.
    """
    m, b, _, _ = state_space(model, damping)
    n, k = b.shape
    big = np.zeros((2 * (n + k), 2 * (n + k)))
    big[:n, :n] = m
    big[:n, n:n + k] = b
    big[: n + k, n + k:] = np.eye(n + k)
    e = linalg.expm(big * dt)
    integral = e[:n, n + k:] / dt
    return e[:n, :n], e[:n, n:n + k], integral[:, :n], integral[:, n:n + k]


def _discretize(model: DimensionlessModel, damping: float, dt: float, stride: int) -> _Blocks:
    phi, gamma, avg_state, avg_input = zoh_step(model, damping, dt)
    _, _, c, d = state_space(model, damping)
    powers = [np.eye(4)]
    for _ in range(stride):
        powers.append(phi @ powers[-1])
    # partial sums G_n = sum_{i<n} phi^i
    partial = [np.zeros((4, 4))]
    for i in range(stride):
        partial.append(partial[-1] + powers[i])
    avg = partial[stride] / stride
    end_maps = np.stack([powers[stride - 1 - j] @ gamma for j in range(stride)])  # (s, 4, 3)
    mean_maps = np.stack([partial[stride - 1 - j] @ gamma / stride for j in range(stride)])

    # per-step vacuum inputs have variance 1/(2 dt) on each of n_a, n_phi
    k = np.concatenate([end_maps[:, :, :2], mean_maps[:, :, :2],
                        np.broadcast_to(np.eye(2) / stride, (stride, 2, 2))], axis=1)
    cov = np.einsum("jab,jcb->ac", k, k) / (2.0 * dt)
    noise_root = _sqrt_psd(0.5 * (cov + cov.T))

    stationary = None
    if np.max(np.abs(np.linalg.eigvals(phi))) < 1.0 - 1e-12:
        q = gamma[:, :2] @ gamma[:, :2].T / (2.0 * dt)
        stationary = linalg.solve_discrete_lyapunov(phi, q)
        stationary = 0.5 * (stationary + stationary.T)

    modes = None
    lam, vec = np.linalg.eig(powers[stride])
    if np.linalg.cond(vec) < MODAL_COND_LIMIT:
        modes = (lam, vec)
    return _Blocks(
        power=powers[stride], avg=avg,
        drive_end=end_maps[:, :, 2].T, drive_mean=mean_maps[:, :, 2].T,
        noise_root=noise_root, avg_state=avg_state, avg_input=avg_input,
        out_c=c, out_d=d, stationary_cov=stationary, modes=modes,
    )


def _generator(seed: int, segment: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(segment,))))


def _sqrt_psd(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(cov)
    return v * np.sqrt(np.clip(w, 0.0, None))


def _check_config(model: DimensionlessModel, config: OracleConfig):
    if not (math.isfinite(model.p_m) and math.isfinite(model.q_m_d2)):
        raise DomainError("model must be finite")
    if model.x0 > 0 and config.duration < 50.0 / model.x0:
        raise DomainError(
            f"duration {config.duration} too short to resolve the mechanical line; "
            f"need >= 50/x0 = {50.0 / model.x0:.4g}"
        )
    if stability_class(model) is StabilityClass.UNSTABLE_SPRING and config.gamma_m_rel == 0:
        raise DomainError(
            "the optical spring is anti-damped; set gamma_m_rel > 0 to regularize it"
        )
    if config.steps < 2 * config.record_stride:
        raise DomainError("duration too short for the recording stride")


def _recurse(blocks: _Blocks, state: np.ndarray, inc: np.ndarray):
    """Block states s_0..s_{n-1} and s_n for s_{b+1} = P s_b + inc_b.

    ``inc`` is (blocks, 4, batch).
    """
    n = inc.shape[0]
    starts = np.empty_like(inc)
    if blocks.modes is None:
        for i in range(n):
            starts[i] = state
            state = blocks.power @ state + inc[i]
        return starts, state
    lam, vec = blocks.modes
    z0 = np.linalg.solve(vec, state.astype(complex))
    w = np.linalg.solve(vec, inc.astype(complex))
    zs = np.empty_like(w)
    final = np.empty_like(z0)
    for i, li in enumerate(lam):
        y, _ = signal.lfilter([1.0], [1.0, -li], w[:, i, :], axis=0, zi=(li * z0[i])[None, :])
        zs[0, i] = z0[i]
        zs[1:, i] = y[:-1]
        final[i] = y[-1]
    return np.matmul(vec, zs).real, (vec @ final).real


def _run_batch(blocks: _Blocks, config: OracleConfig, segments: list[int],
               keep_state: bool) -> dict[str, np.ndarray]:
    nb = len(segments)
    gens = [_generator(config.seed, s) for s in segments]
    state = np.zeros((4, nb))
    if config.noise and blocks.stationary_cov is not None:
        root = _sqrt_psd(blocks.stationary_cov)
        state = root @ np.stack([g.standard_normal(4) for g in gens], axis=1)
    scale = math.sqrt(blocks.stationary_cov[2, 2]) if blocks.stationary_cov is not None else 0.0

    stride, dt = config.record_stride, config.dt
    n_rec = config.steps // stride
    out = {"a1a": np.empty((nb, n_rec)), "a1phi": np.empty((nb, n_rec))}
    if keep_state:
        for name in ("a0a", "a0phi", "y"):
            out[name] = np.empty((nb, n_rec))

    drive = config.drive
    done = 0
    while done < n_rec:
        size = min(CHUNK, n_rec - done)
        inc = np.zeros((size, 4, nb))
        s_in = np.zeros((size, 4, nb))
        n_mean = np.zeros((size, 2, nb))
        if config.noise:
            xi = np.stack([g.standard_normal((size, 10)) for g in gens], axis=2)
            nu = np.matmul(blocks.noise_root, xi)
            inc += nu[:, :4]
            s_in += nu[:, 4:8]
            n_mean = nu[:, 8:]
        f_mean = np.zeros(size)
        if drive is not None:
            steps = (done * stride + np.arange(size * stride) + 0.5) * dt
            force = math.sqrt(2.0) * drive.x_drive * drive.amplitude * np.cos(drive.x_drive * steps)
            force = force.reshape(size, stride)
            inc += (force @ blocks.drive_end.T)[:, :, None]
            s_in += (force @ blocks.drive_mean.T)[:, :, None]
            f_mean = force.mean(axis=1)

        starts, state = _recurse(blocks, state, inc)
        s_mean = np.matmul(blocks.avg, starts) + s_in
        u_mean = np.concatenate([n_mean, np.broadcast_to(f_mean[:, None, None], (size, 1, nb))], axis=1)
        mean_state = np.matmul(blocks.avg_state, s_mean) + np.matmul(blocks.avg_input, u_mean)
        rec = np.matmul(blocks.out_c, mean_state) + np.matmul(blocks.out_d, u_mean)

        r0, r1 = done, done + size
        out["a1a"][:, r0:r1] = rec[:, 0, :].T
        out["a1phi"][:, r0:r1] = rec[:, 1, :].T
        q_rec = mean_state[:, 2, :]
        if keep_state:
            out["a0a"][:, r0:r1] = mean_state[:, 0, :].T
            out["a0phi"][:, r0:r1] = mean_state[:, 1, :].T
            out["y"][:, r0:r1] = q_rec.T

        t_end = (done + size) * stride * dt
        if not np.all(np.isfinite(state)) or not np.all(np.isfinite(rec)):
            raise InstabilityError(f"non-finite state after t = {t_end:.4g}; increase gamma_m_rel")
        if scale == 0.0:
            scale = max(float(np.sqrt(np.mean(q_rec ** 2))), 1e-300)
        peak = float(np.max(np.abs(state[2])))
        if peak > DIVERGENCE_FACTOR * scale:
            raise InstabilityError(
                f"displacement grew to {peak:.3g} (initial scale {scale:.3g}) by "
                f"t = {t_end:.4g}; increase gamma_m_rel"
            )
        done += size
    return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("OPTOSPRING_THREADS", "1")))
    except ValueError:
        return 1


def simulate_ensemble(model: DimensionlessModel, config: OracleConfig, *,
                      segments=None, keep_state: bool = False) -> TimeTrace:
    """Simulate independent segments; channels are (segments, samples) arrays."""
    _check_config(model, config)
    damping = damping_of(model, config)
    blocks = _discretize(model, damping, config.dt, config.record_stride)
    seg_ids = list(range(config.segments)) if segments is None else list(segments)
    batches = [seg_ids[i:i + BATCH] for i in range(0, len(seg_ids), BATCH)]
    workers = min(_threads(), len(batches))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _run_batch(blocks, config, b, keep_state), batches))
    else:
        parts = [_run_batch(blocks, config, b, keep_state) for b in batches]
    channels = {k: np.concatenate([p[k] for p in parts], axis=0) for k in parts[0]}
    n_rec = config.steps // config.record_stride
    t = np.arange(n_rec) * config.record_dt
    return TimeTrace(
        dt=config.record_dt,
        t=t,
        channels=channels,
        segments=tuple(seg_ids),
        metadata={"damping": damping, "seed": config.seed, "sim_dt": config.dt},
    )


def simulate_trajectory(model: DimensionlessModel, config: OracleConfig, segment: int = 0) -> TimeTrace:
    """One segment with every channel (a0a, a0phi, y, a1a, a1phi) recorded."""
    ens = simulate_ensemble(model, config, segments=[segment], keep_state=True)
    return TimeTrace(
        dt=ens.dt,
        t=ens.t,
        channels={k: v[0] for k, v in ens.channels.items()},
        segments=ens.segments,
        metadata=ens.metadata,
    )


def write_trace_csv(trace: TimeTrace, path) -> None:
    """Dump a single-segment trace as CSV with header t,a0a,a0phi,y,a1a,a1phi."""
    cols = [trace.t] + [trace.channels[name] for name in TRACE_HEADER[1:]]
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for row in zip(*cols):
            writer.writerow([f"{v:.12e}" for v in row])
    os.replace(tmp, path)


def estimate_output_psd(trace: TimeTrace, theta: float, *, discard: float = DISCARD,
                        gamma0: float = 1.0) -> SpectrumResult:
    """Segment-averaged Hann periodogram of the detected quadrature.

    Single-sided, normalized so that vacuum gives 1. ``stderr`` is the
    standard error of the mean over segments.
    """
    data = np.atleast_2d(trace.quadrature(theta))
    n_seg = data.shape[0]
    if n_seg < MIN_SEGMENTS:
        raise EstimatorError(f"need at least {MIN_SEGMENTS} segments, got {n_seg}")
    start = int(math.ceil(discard * data.shape[1]))
    data = data[:, start:]
    if data.shape[1] < 16:
        raise EstimatorError("too few samples left after discarding the transient")
    f, pxx = signal.periodogram(data, fs=1.0 / trace.dt, window="hann", detrend=False,
                                scaling="density", axis=-1)
    keep = slice(1, -1)  # drop DC and Nyquist
    x = 2.0 * math.pi * f[keep]
    per_segment = pxx[:, keep]
    mean = per_segment.mean(axis=0)
    stderr = per_segment.std(axis=0, ddof=1) / math.sqrt(n_seg)
    return SpectrumResult(
        grid=x,
        omega=x * gamma0,
        channels={"s_theta": mean, "stderr": stderr},
        theta=theta,
        normalization="single-sided, vacuum = 1",
        metadata={"segments": n_seg, "samples": data.shape[1], "record_dt": trace.dt},
    )


def relative_rms(estimate: np.ndarray, reference: np.ndarray) -> float:
    return float(np.sqrt(np.mean((estimate / reference - 1.0) ** 2)))


def compare_with_analytic(model: DimensionlessModel, config: OracleConfig, theta: float,
                          band: tuple[float, float] = (0.2, 3.0), trace: TimeTrace | None = None):
    """Simulated vs damped exact-cavity analytic PSD over band*x0.

    Returns (estimate, analytic values on the band, band mask, relative RMS).
    """
    from .squeezing import output_quadrature_psd

    if trace is None:
        trace = simulate_ensemble(model, config)
    est = estimate_output_psd(trace, theta, gamma0=model.gamma0)
    mask = (est.grid >= band[0] * model.x0) & (est.grid <= band[1] * model.x0)
    damping = damping_of(model, config)
    ref = _analytic_output_psd(est.grid[mask], theta, model, damping)
    return est, ref, mask, relative_rms(est["s_theta"][mask], ref)


def _analytic_output_psd(x, theta, model, damping):
    gain_a, gain_phi, _ = quadrature_transfer(x, theta, model, damping=damping, exact=True)
    return np.abs(gain_a) ** 2 + np.abs(gain_phi) ** 2


@dataclass(frozen=True)
class HarmonicCheck:
    measured: complex
    analytic: complex
    relative_error: float  # absolute error when the analytic gain is zero
    displacement_gain: complex  # q per unit dimensionless force


def _lock_in(samples: np.ndarray, t: np.ndarray, x: float, interval: float) -> complex:
    w = signal.get_window("hann", samples.size)
    z = np.sum(w * samples * np.exp(1j * x * (t + interval / 2.0))) * 2.0 / np.sum(w)
    # undo the boxcar average over one recording interval
    return z / np.sinc(x * interval / (2.0 * math.pi))


def harmonic_transfer_check(model: DimensionlessModel, x_drive: float, theta: float,
                            config: OracleConfig, *, amplitude: float = 1.0,
                            transient_tol: float = 0.05) -> HarmonicCheck:
    """Drive the noiseless simulation with a sinusoidal force and compare the
    detected-quadrature response with the analytic signal gain."""
    cfg = OracleConfig(
        dt=config.dt, duration=config.duration, segments=config.segments, seed=config.seed,
        gamma_m_rel=config.gamma_m_rel, drive=Sinusoid(amplitude, x_drive), noise=False,
        record_stride=config.record_stride,
    )
    tr = simulate_trajectory(model, cfg)
    start = int(math.ceil(DISCARD * tr.t.size))
    t = tr.t[start:]
    out = tr.quadrature(theta)[start:]
    meas = _lock_in(out, t, x_drive, tr.dt) / amplitude
    half = t.size // 2
    first = _lock_in(out[:half], t[:half], x_drive, tr.dt) / amplitude
    second = _lock_in(out[half:], t[half:], x_drive, tr.dt) / amplitude
    if abs(first - second) > transient_tol * abs(meas):
        raise TransientError(
            f"response at x = {x_drive} still changing (halves differ by "
            f"{abs(first - second) / abs(meas):.2%}); lengthen duration or raise gamma_m_rel"
        )
    _, _, gain_f = quadrature_transfer(x_drive, theta, model, damping=damping_of(model, cfg), exact=True)
    analytic = complex(gain_f)
    q = _lock_in(tr.channels["y"][start:], t, x_drive, tr.dt)
    force = math.sqrt(2.0) * x_drive * amplitude
    return HarmonicCheck(
        measured=complex(meas),
        analytic=analytic,
        relative_error=abs(meas - analytic) / abs(analytic) if analytic != 0 else abs(meas),
        displacement_gain=complex(q / force),
    )
