"""Centralised multichannel feedforward FxLMS controller.

The error at microphone ``m`` is ``e_m(n) = d_m(n) - sum_k (s_km * y_k)(n)``
and each control filter is adapted by ``W_k <- W_k + mu * sum_m x'_km e_m``,
where ``x'_km`` is the reference filtered through the secondary-path estimate.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from . import kernels
from .errors import DivergenceError
from .signals import SampleBuffer

log = logging.getLogger(__name__)

P_REF = 20e-6
BLOWUP_FACTOR = 1e6  # residual 120 dB above the disturbance peak counts as divergence


@dataclass(frozen=True)
class FxlmsConfig:
    taps: int
    step_size: float
    n_secondaries: int
    n_errors: int
    leakage: float = 0.0
    output_limit: float | None = None

    def __post_init__(self):
        if self.taps < 1:
            raise ValueError(f"taps must be >= 1, got {self.taps}")
        if not self.step_size >= 0 or not math.isfinite(self.step_size):
            raise ValueError(f"step_size must be a finite non-negative number, got {self.step_size}")
        if self.n_secondaries < 1 or self.n_errors < 1:
            raise ValueError("need at least one secondary source and one error microphone")
        if not 0 <= self.leakage <= 1:
            raise ValueError(f"leakage must lie in [0, 1], got {self.leakage}")
        if self.output_limit is not None and not self.output_limit > 0:
            raise ValueError(f"output_limit must be positive, got {self.output_limit}")


def _check_s_hat(s_hat, config: FxlmsConfig):
    s_hat = np.asarray(s_hat, dtype=float)
    expected = (config.n_secondaries, config.n_errors)
    if s_hat.ndim != 3 or s_hat.shape[:2] != expected:
        raise ValueError(f"s_hat must have shape {expected + ('taps',)}, got {s_hat.shape}")
    return s_hat


class ControllerState:
    """Adaptive filter bank with its reference and filtered-reference histories.

    Single-owner and mutated in place by :func:`fxlms_step`.
    """

    def __init__(self, config: FxlmsConfig, s_hat, W=None):
        self.config = config
        self.s_hat = _check_s_hat(s_hat, config)
        K, M, L = config.n_secondaries, config.n_errors, config.taps
        self.W = np.zeros((K, L)) if W is None else np.array(W, dtype=float).reshape(K, L)
        # newest sample first
        self.x_history = np.zeros(max(L, self.s_hat.shape[2]))
        self.filtered_ref = np.zeros((K, M, L))
        self.n = 0

    def output(self, x_n: float) -> np.ndarray:
        """Push ``x_n``, update the filtered references and return the K control outputs."""
        L = self.config.taps
        self.x_history = np.roll(self.x_history, 1)
        self.x_history[0] = x_n
        y = self.W @ self.x_history[:L]
        if self.config.output_limit is not None:
            y = np.clip(y, -self.config.output_limit, self.config.output_limit)
        Ls = self.s_hat.shape[2]
        self.filtered_ref = np.roll(self.filtered_ref, 1, axis=2)
        self.filtered_ref[:, :, 0] = self.s_hat @ self.x_history[:Ls]
        return y

    def adapt(self, e_vec) -> None:
        """Weight update with the error samples aligned to the latest reference sample."""
        cfg = self.config
        e_vec = np.asarray(e_vec, dtype=float).reshape(cfg.n_errors)
        if not np.all(np.isfinite(e_vec)):
            raise DivergenceError(f"non-finite error at sample {self.n}", self.n, cfg.step_size)
        self.W *= 1.0 - cfg.step_size * cfg.leakage
        self.W += cfg.step_size * np.einsum("kml,m->kl", self.filtered_ref, e_vec)
        if not np.all(np.isfinite(self.W)):
            raise DivergenceError(f"non-finite weights at sample {self.n}", self.n, cfg.step_size)
        self.n += 1


def fxlms_step(state: ControllerState, x_n: float, e_vec) -> np.ndarray:
    """One controller tick: output for ``x_n`` followed by the update with ``e_vec``."""
    y = state.output(x_n)
    state.adapt(e_vec)
    return y


def filtered_reference(x, s_hat) -> np.ndarray:
    """``x'_km = s_hat_km * x`` for every pair, shape ``(K, M, N)``."""
    s_hat = np.asarray(s_hat, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.stack([[sps.lfilter(h, 1.0, x) for h in row] for row in s_hat])


def path_delay(s_hat) -> int:
    """Largest bulk delay (index of the peak tap) over all secondary-path estimates."""
    s_hat = np.asarray(s_hat)
    return int(np.max(np.argmax(np.abs(s_hat), axis=-1)))


def stability_bound(x, s_hat, taps) -> float:
    """Step-size estimate ``2 / (L * P_x' * (2*delay + 1))``.

    ``P_x'`` is the filtered-reference power summed over all (secondary, error)
    pairs, so ``L * P_x'`` bounds the largest eigenvalue of the filtered-reference
    correlation. A gradient delayed by ``delay`` samples stays stable while
    ``mu * lambda < 2*sin(pi / (4*delay + 2))``, which ``2 / (2*delay + 1)``
    never exceeds. With zero delay this is the usual ``2 / (L * P_x')``.
    """
    xf = filtered_reference(x, s_hat)
    p = float(np.sum(np.mean(xf**2, axis=-1)))
    if p == 0:
        return math.inf
    return 2.0 / (taps * p * (2 * path_delay(s_hat) + 1))


def spl_to_pressure_rms(spl_db: float) -> float:
    return P_REF * 10 ** (spl_db / 20)


@dataclass
class SimulationLog:
    """Per-sample record of a closed-loop run. Signals are ``(channels, N)``."""

    e: np.ndarray
    y: np.ndarray
    d: np.ndarray
    W: np.ndarray
    sample_rate: int
    settle_index: int = 0
    snapshots: np.ndarray | None = None
    snapshot_interval: int = 0
    converged: bool = False
    converged_index: int | None = None
    backend: str = field(default=kernels.BACKEND)

    @property
    def error_buffer(self) -> SampleBuffer:
        return SampleBuffer(self.e, self.sample_rate)

    @property
    def disturbance_buffer(self) -> SampleBuffer:
        return SampleBuffer(self.d, self.sample_rate)

    def converged_segment(self, signal=None) -> np.ndarray:
        """Samples from the convergence point on; the last window when not converged."""
        sig = self.e if signal is None else signal
        start = self.converged_index
        if start is None:
            start = max(self.settle_index, sig.shape[1] - int(0.5 * self.sample_rate))
        return sig[:, start:]

    def residual_power(self, window: float = 0.5):
        """Residual power (sum over microphones) in consecutive windows: ``(times, power)``."""
        return window_power(self.e, self.sample_rate, window)


def window_power(sig, sample_rate, window=0.5, start=0):
    n = int(round(window * sample_rate))
    total = np.sum(np.asarray(sig)[:, start:] ** 2, axis=0)
    nwin = total.size // n
    p = total[:nwin * n].reshape(nwin, n).mean(axis=1)
    t = (start + n * (np.arange(nwin) + 1)) / sample_rate
    return t, p


def detect_convergence(e, sample_rate, window=0.5, tol_db=0.1, start=0):
    """First sample index after which windowed residual power changes by less than ``tol_db``.

    Windows are non-overlapping, of ``window`` seconds, beginning at ``start``.
    The returned index is the start of the later window of the first stable
    pair, or ``None``.
    """
    n = int(round(window * sample_rate))
    _, p = window_power(e, sample_rate, window, start)
    for i in range(1, p.size):
        if p[i - 1] == 0 and p[i] == 0:
            return start + i * n
        if p[i - 1] > 0 and p[i] > 0 and abs(10 * math.log10(p[i] / p[i - 1])) < tol_db:
            return start + i * n
    return None


def run_simulation(paths, config: FxlmsConfig, s_hat, primary: SampleBuffer, settle: float = 0.0,
                   background_spl: float | None = 40.0, seed: int = 0,
                   snapshot_interval: float | None = None, reference_path=None,
                   reference_noise_rms: float = 0.0, convergence_window: float = 0.5,
                   W0=None) -> SimulationLog:
    """Sample-synchronous closed loop of plant and controller.

    The reference is the primary signal itself unless ``reference_path`` (an
    FIR) and/or ``reference_noise_rms`` degrade it. Background noise at
    ``background_spl`` dB is added to every disturbance channel. For the first
    ``settle`` seconds the controller is silent and does not adapt.
    """
    s_hat = _check_s_hat(s_hat, config)
    if paths.n_secondaries != config.n_secondaries or paths.n_errors != config.n_errors:
        raise ValueError(
            f"PathSet is {paths.n_secondaries}x{paths.n_errors} but controller is "
            f"{config.n_secondaries}x{config.n_errors}"
        )
    if primary.channels != 1:
        raise ValueError("primary signal must be single-channel")
    if primary.sample_rate != paths.sample_rate:
        raise ValueError(f"sample rates differ: {primary.sample_rate} vs {paths.sample_rate}")
    sr = primary.sample_rate
    x_src = primary.mono
    N = x_src.size
    rng = np.random.default_rng(seed)
    d = paths.primary_response(x_src)
    if background_spl is not None:
        d = d + spl_to_pressure_rms(background_spl) * rng.standard_normal(d.shape)
    x = x_src if reference_path is None else sps.lfilter(np.asarray(reference_path, float), 1.0, x_src)
    if reference_noise_rms > 0:
        x = x + reference_noise_rms * rng.standard_normal(N)
    x = np.ascontiguousarray(x, dtype=float)
    xf = np.ascontiguousarray(filtered_reference(x, s_hat))
    W = np.zeros((config.n_secondaries, config.taps)) if W0 is None else np.array(W0, dtype=float)
    snap_every = 0 if not snapshot_interval else max(1, int(round(snapshot_interval * sr)))
    snaps = np.zeros((N // snap_every if snap_every else 0, config.n_secondaries, config.taps))
    start = int(round(settle * sr))
    limit = config.output_limit or 0.0
    e, y, bad = kernels.fxlms_loop(x, np.ascontiguousarray(d), xf,
                                   np.ascontiguousarray(paths.secondary_irs), W,
                                   float(config.step_size), float(config.leakage), float(limit),
                                   start, snap_every, snaps)
    if bad >= 0:
        raise DivergenceError(
            f"FxLMS diverged at sample {bad} with step size {config.step_size:g}",
            bad, config.step_size,
        )
    ceiling = BLOWUP_FACTOR * max(float(np.max(np.abs(d))), P_REF)
    over = np.flatnonzero(np.max(np.abs(e), axis=0) > ceiling)
    if over.size:
        raise DivergenceError(
            f"FxLMS residual exceeded {ceiling:.3g} at sample {over[0]} with step size "
            f"{config.step_size:g}", int(over[0]), config.step_size,
        )
    if not np.all(np.isfinite(W)):
        raise DivergenceError(f"non-finite weights at end of run with step size {config.step_size:g}",
                              N - 1, config.step_size)
    conv = detect_convergence(e, sr, convergence_window, start=start)
    log.debug("simulation finished: %d samples, converged at %s", N, conv)
    return SimulationLog(e=e, y=y, d=d, W=W, sample_rate=sr, settle_index=start,
                         snapshots=snaps if snap_every else None, snapshot_interval=snap_every,
                         converged=conv is not None, converged_index=conv)


@dataclass
class IdentificationResult:
    s_hat: np.ndarray
    error_ratio: np.ndarray  # final-pass error power / plant output power, (K, M)


def identify_secondary_paths(plant, excitation: SampleBuffer, taps: int, mu: float,
                             passes: int = 1, n_secondaries: int | None = None,
                             noise_rms: float = 0.0, seed: int = 0) -> IdentificationResult:
    """Offline LMS identification, driving one secondary source at a time.

    ``plant(k, u)`` must return the ``(M, N)`` microphone response to secondary
    ``k`` driven by ``u``; a :class:`PathSet` satisfies this. Optional white
    measurement noise of ``noise_rms`` is added to the responses.
    """
    K = plant.n_secondaries if n_secondaries is None else n_secondaries
    u = np.ascontiguousarray(excitation.mono, dtype=float)
    rng = np.random.default_rng(seed)
    s_hat, ratios = [], []
    for k in range(K):
        t = np.asarray(plant(k, u), dtype=float)
        if noise_rms > 0:
            t = t + noise_rms * rng.standard_normal(t.shape)
        h = np.zeros((t.shape[0], taps))
        err_energy, bad = kernels.lms_loop(u, np.ascontiguousarray(t), h, float(mu), int(passes))
        if bad >= 0 or not np.all(np.isfinite(h)):
            raise DivergenceError(f"secondary-path identification diverged (mu_id={mu:g}) "
                                  f"for secondary {k}", bad, mu)
        out_energy = np.sum(t**2, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios.append(np.where(out_energy > 0, err_energy / out_energy, 0.0))
        s_hat.append(h)
    return IdentificationResult(np.stack(s_hat), np.stack(ratios))


def lms_step_size(excitation: SampleBuffer, taps: int, fraction: float = 0.05) -> float:
    """``fraction`` of the LMS bound ``2 / (taps * P_u)``."""
    p = float(np.mean(excitation.mono**2))
    return fraction * 2.0 / (taps * p)


@dataclass
class WienerResult:
    W: np.ndarray
    residual_power: float
    regularized: bool = False


def wiener_oracle(x: SampleBuffer, d: SampleBuffer, s, taps: int) -> WienerResult:
    """Batch least-squares control filters for the filtered-reference model.

    Minimises ``sum_n sum_m (d_m(n) - sum_k (s_km * (W_k * x))(n))**2`` through
    the normal equations of the regressors ``x'_km(n - l)``. ``residual_power``
    is the mean over samples of the squared residual summed over microphones.
    """
    s = np.asarray(s, dtype=float)
    K, M, _ = s.shape
    L = taps
    xs = x.mono
    D = d.samples
    if D.shape[0] != M:
        raise ValueError(f"d has {D.shape[0]} channels but s has {M} error channels")
    N = xs.size
    if N < 10 * K * L:
        raise ValueError(f"signal of {N} samples is too short for {K * L} coefficients")
    xf = filtered_reference(xs, s)  # (K, M, N)
    # regressor block for microphone m: columns (k, l) hold x'_km(n - l)
    R = np.zeros((K * L, K * L))
    b = np.zeros(K * L)
    for m in range(M):
        A = np.empty((N, K * L))
        for k in range(K):
            for l in range(L):
                col = A[:, k * L + l]
                col[:l] = 0.0
                col[l:] = xf[k, m, :N - l]
        R += A.T @ A
        b += A.T @ D[m]
    regularized = False
    try:
        if np.linalg.cond(R) > 1e12:
            raise np.linalg.LinAlgError
        w = np.linalg.solve(R, b)
    except np.linalg.LinAlgError:
        regularized = True
        warnings.warn("normal matrix is singular; using ridge regularisation", RuntimeWarning)
        w = np.linalg.solve(R + 1e-10 * np.trace(R) * np.eye(K * L), b)
    W = w.reshape(K, L)
    pred = np.zeros_like(D)
    for m in range(M):
        for k in range(K):
            pred[m] += sps.lfilter(W[k], 1.0, xf[k, m])
    resid = D - pred
    return WienerResult(W, float(np.mean(np.sum(resid**2, axis=0))), regularized)


def observe(paths, primary: SampleBuffer, y, background_spl: float | None = 40.0, seed: int = 0):
    """Pressures at observation microphones without and with control, ``(off, on)``.

    ``paths`` maps the primary and the K secondaries to the observation points;
    ``y`` holds the control outputs of a completed run. The background noise is
    drawn from its own seeded stream and is common to both signals.
    """
    off = paths.primary_response(primary.mono)
    if background_spl is not None:
        rng = np.random.default_rng([seed, 1])
        off = off + spl_to_pressure_rms(background_spl) * rng.standard_normal(off.shape)
    on = off.copy()
    for k in range(paths.n_secondaries):
        on -= paths.secondary_response(k, y[k])
    return off, on
