"""Skin-conductance synthesis: fixed response function convolved with a
Gaussian-mixture sudomotor drive whose bursts come from an MLP.

The response function is a Gaussian (latency ``t0``, width ``sigma2``)
smoothed biexponential ``exp(-l1 t) + exp(-l2 t)``. The drive for one
60-s window is ``sum_i a_i exp(-(t - tau_i)^2 / 2 sigma1^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numba
import numpy as np

from . import neural
from .dsp import WaveformChannel
from .errors import OutOfRangeError, UntrainedError, ValidationError
from .neural import MLPConfig, MLPWeights, TrainConfig
from .scenario import normalize_affect

WINDOW = 60.0          # s
SAMPLE_RATE = 16.0     # Hz
N_BURSTS = 10          # per window
MAX_BURSTS = 30        # per minute
A_MAX = 2.0            # µS
BASELINE = 2.0         # µS
SIGMA1 = 0.3           # s
H_DURATION = 60.0      # s of response function kept
HIDDEN = 128
MET_SCALE = 15.0
DAY = 86400.0
CONTEXT_COLUMNS = ("valence", "arousal", "met", "age", "gender", "window_start")

# light L2 and no dropout: the generic defaults flatten per-emotion differences
EMOTION_TRAIN = TrainConfig(learning_rate=1e-3, minibatch_size=100, l2_penalty=1e-5,
                            dropout_rate=0.0)
ACTION_TRAIN = TrainConfig(learning_rate=1e-4, minibatch_size=500, l2_penalty=1e-5,
                           dropout_rate=0.0)


@dataclass(frozen=True)
class ResponseFunctionParams:
    t0: float = 3.0745
    sigma2: float = 0.7013
    lambda1: float = 0.3176
    lambda2: float = 0.0708

    def __post_init__(self):
        if min(self.t0, self.sigma2, self.lambda1, self.lambda2) <= 0:
            raise ValidationError("response-function parameters must be positive")


@dataclass(frozen=True)
class BurstSet:
    """Burst times (s, relative to the window start) and amplitudes (µS)."""

    taus: np.ndarray
    amps: np.ndarray
    sigma1: float = SIGMA1

    def __post_init__(self):
        taus = np.atleast_1d(np.asarray(self.taus, dtype=float))
        amps = np.atleast_1d(np.asarray(self.amps, dtype=float))
        if taus.shape != amps.shape:
            raise ValidationError("taus and amps differ in length")
        if taus.size > MAX_BURSTS:
            raise OutOfRangeError(f"{taus.size} bursts exceed the cap of {MAX_BURSTS} per minute")
        if np.any((taus < 0) | (taus >= WINDOW)):
            raise OutOfRangeError("burst times must lie in [0, 60) s")
        if np.any(amps < 0):
            raise OutOfRangeError("burst amplitudes must be >= 0")
        if self.sigma1 <= 0:
            raise ValidationError("sigma1 must be positive")
        order = np.argsort(taus, kind="stable")
        object.__setattr__(self, "taus", taus[order])
        object.__setattr__(self, "amps", amps[order])

    def __len__(self):
        return self.taus.size

    @classmethod
    def empty(cls) -> "BurstSet":
        return cls(np.zeros(0), np.zeros(0))


def response_function(duration: float = H_DURATION, sample_rate: float = SAMPLE_RATE,
                      params: ResponseFunctionParams = ResponseFunctionParams()) -> np.ndarray:
    """Sampled ``h = N * E`` on ``[0, duration)``.

    Both factors are sampled on the same grid and combined by discrete
    (causal) convolution scaled by the sample interval.
    """
    if duration < 30.0:
        raise ValidationError("response function needs at least 30 s for its tail")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    gauss = np.exp(-0.5 * ((t - params.t0) / params.sigma2) ** 2) / \
        (params.sigma2 * np.sqrt(2.0 * np.pi))
    biexp = np.exp(-params.lambda1 * t) + np.exp(-params.lambda2 * t)
    h = np.convolve(gauss, biexp)[:n] / sample_rate
    return np.maximum(h, 0.0)


def sudomotor_drive(bursts: BurstSet, duration: float, sample_rate: float = SAMPLE_RATE,
                    offset: float = 0.0) -> np.ndarray:
    """Gaussian-mixture drive sampled at ``k / sample_rate`` for ``k < duration*fs``;
    burst times are shifted by ``offset`` seconds."""
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    if len(bursts) == 0:
        return np.zeros(n)
    d = t[None, :] - (bursts.taus[:, None] + offset)
    return (bursts.amps[:, None] * np.exp(-0.5 * (d / bursts.sigma1) ** 2)).sum(axis=0)


def fft_convolve(u: np.ndarray, h: np.ndarray, n_out: int, dt: float) -> np.ndarray:
    """First ``n_out`` samples of ``dt * (u * h)`` via zero-padded FFT."""
    m = u.size + h.size - 1
    n_fft = 1 << max(m - 1, 1).bit_length()
    y = np.fft.irfft(np.fft.rfft(u, n_fft) * np.fft.rfft(h, n_fft), n_fft)[:m] * dt
    out = np.zeros(n_out)
    k = min(n_out, m)
    out[:k] = y[:k]
    return out


def direct_convolve(u: np.ndarray, h: np.ndarray, n_out: int, dt: float) -> np.ndarray:
    """Same as :func:`fft_convolve` by explicit summation (reference path)."""
    out = np.zeros(n_out)
    for k in range(n_out):
        j = np.arange(max(0, k - h.size + 1), min(k, u.size - 1) + 1)
        out[k] = dt * np.dot(u[j], h[k - j])
    return out


def synthesize_scr(bursts: BurstSet, duration: float = WINDOW, sample_rate: float = SAMPLE_RATE,
                   baseline: float = BASELINE,
                   params: ResponseFunctionParams = ResponseFunctionParams()) -> WaveformChannel:
    """Baseline plus the drive convolved with the response function."""
    h = response_function(max(H_DURATION, 30.0), sample_rate, params)
    u = sudomotor_drive(bursts, duration, sample_rate)
    phasic = np.maximum(fft_convolve(u, h, u.size, 1.0 / sample_rate), 0.0)
    return WaveformChannel("scr", sample_rate, "uS", baseline + phasic)


# --- context network --------------------------------------------------------

def context_vector(valence, arousal, met, age, gender, window_start) -> np.ndarray:
    """Network inputs scaled to [0, 1]; ``window_start`` enters as time of day."""
    g = np.asarray(gender)
    if g.dtype.kind in "US":
        g = (g == "female").astype(float)
    cols = np.broadcast_arrays(
        normalize_affect(valence), normalize_affect(arousal),
        np.clip(np.asarray(met, dtype=float) / MET_SCALE, 0.0, 1.0),
        np.clip(np.asarray(age, dtype=float) / 100.0, 0.0, 1.0),
        g.astype(float),
        np.mod(np.asarray(window_start, dtype=float), DAY) / DAY)
    return np.stack(cols, axis=-1)


def scr_config(seed: int = 0) -> MLPConfig:
    return MLPConfig(len(CONTEXT_COLUMNS), HIDDEN, 2 * N_BURSTS, "sigmoid", seed=seed)


def _bursts_from_output(y: np.ndarray, a_max: float) -> BurstSet:
    taus = np.minimum(WINDOW * y[:N_BURSTS], np.nextafter(WINDOW, 0.0))
    return BurstSet(taus, a_max * y[N_BURSTS:])


def theta_from_context(weights: Optional[MLPWeights], valence, arousal, met, age, gender,
                       window_start) -> BurstSet:
    if weights is None or not weights.meta.get("trained"):
        raise UntrainedError("skin-conductance burst model has not been trained")
    x = context_vector(valence, arousal, met, age, gender, window_start)
    y = neural.forward(weights, x)
    return _bursts_from_output(y, weights.meta.get("a_max", A_MAX))


def default_bursts(window_index: int, seed: int, met: float = 1.0) -> BurstSet:
    """Seeded bursts used when no trained network is supplied."""
    rng = np.random.default_rng([seed, window_index])
    scale = 0.15 + 0.02 * max(met - 1.0, 0.0)
    return BurstSet(rng.uniform(0.0, WINDOW, N_BURSTS),
                    A_MAX * np.clip(scale * rng.uniform(0.5, 1.5, N_BURSTS), 0.0, 1.0))


def synthesize_scr_run(burst_sets, duration: float, sample_rate: float = SAMPLE_RATE,
                       baseline: float = BASELINE,
                       params: ResponseFunctionParams = ResponseFunctionParams()) -> WaveformChannel:
    """Stitch consecutive 60-s windows; the drive is built over the whole
    record so response tails carry across window boundaries."""
    n = int(round(duration * sample_rate))
    u = np.zeros(n)
    for k, b in enumerate(burst_sets):
        u += sudomotor_drive(b, duration, sample_rate, offset=k * WINDOW)
    h = response_function(H_DURATION, sample_rate, params)
    phasic = np.maximum(fft_convolve(u, h, n, 1.0 / sample_rate), 0.0)
    return WaveformChannel("scr", sample_rate, "uS", baseline + phasic)


# --- end-to-end training ----------------------------------------------------

@numba.njit(cache=True)
def _batch_drive(taus, amps, fs, n_t, sigma, reach):
    """Drive for each row; each Gaussian is evaluated within ``reach`` sigmas."""
    b, n = taus.shape
    u = np.zeros((b, n_t))
    for r in range(b):
        for i in range(n):
            lo = max(int(np.ceil((taus[r, i] - reach * sigma) * fs)), 0)
            hi = min(int(np.floor((taus[r, i] + reach * sigma) * fs)) + 1, n_t)
            for k in range(lo, hi):
                d = k / fs - taus[r, i]
                u[r, k] += amps[r, i] * np.exp(-0.5 * d * d / (sigma * sigma))
    return u


@numba.njit(cache=True)
def _batch_drive_grad(taus, amps, du, fs, sigma, reach):
    """Chain rule from dL/du to the burst amplitudes and times."""
    b, n = taus.shape
    n_t = du.shape[1]
    d_amp = np.zeros((b, n))
    d_tau = np.zeros((b, n))
    for r in range(b):
        for i in range(n):
            lo = max(int(np.ceil((taus[r, i] - reach * sigma) * fs)), 0)
            hi = min(int(np.floor((taus[r, i] + reach * sigma) * fs)) + 1, n_t)
            ga = 0.0
            gt = 0.0
            for k in range(lo, hi):
                d = k / fs - taus[r, i]
                g = np.exp(-0.5 * d * d / (sigma * sigma))
                ga += du[r, k] * g
                gt += du[r, k] * g * d
            d_amp[r, i] = ga
            d_tau[r, i] = amps[r, i] * gt / (sigma * sigma)
    return d_amp, d_tau


GAUSS_REACH = 8.0  # sigmas; exp(-32) is below double-precision relevance


def _window_loss_grad(y: np.ndarray, target: np.ndarray, h: np.ndarray, fs: float,
                      a_max: float, sigma1: float = SIGMA1):
    """Mean squared SCR error of a batch and its gradient w.r.t. the outputs."""
    b, n_t = target.shape
    dt = 1.0 / fs
    taus = np.ascontiguousarray(WINDOW * y[:, :N_BURSTS])
    amps = np.ascontiguousarray(a_max * y[:, N_BURSTS:])
    u = _batch_drive(taus, amps, fs, n_t, sigma1, GAUSS_REACH)
    m = n_t + h.size - 1
    n_fft = 1 << (m - 1).bit_length()
    hf = np.fft.rfft(h, n_fft)
    pred = np.fft.irfft(np.fft.rfft(u, n_fft, axis=1) * hf, n_fft, axis=1)[:, :n_t] * dt
    resid = pred - target
    loss = float(np.mean(np.sum(resid ** 2, axis=1)) / n_t)
    # dL/du[j] = (2 dt / (b n_t)) sum_t resid[t] h[t - j]
    rf = np.fft.rfft(resid, n_fft, axis=1)
    corr = np.fft.irfft(rf * np.conj(hf), n_fft, axis=1)[:, :n_t]
    du = np.ascontiguousarray(corr * (2.0 * dt / (b * n_t)))
    d_amp, d_tau = _batch_drive_grad(taus, amps, du, fs, sigma1, GAUSS_REACH)
    grad = np.concatenate([WINDOW * d_tau, a_max * d_amp], axis=1)
    return loss, grad


def scr_loss(weights: MLPWeights, inputs, targets, sample_rate: float = SAMPLE_RATE) -> float:
    h = response_function(H_DURATION, sample_rate)
    y = neural.forward(weights, np.atleast_2d(inputs))
    base = weights.meta.get("baseline", BASELINE)
    loss, _ = _window_loss_grad(y, np.atleast_2d(targets) - base, h, sample_rate,
                                weights.meta.get("a_max", A_MAX))
    return loss


def train_scr(inputs, targets, seed: int = 0, mode: str = "emotion", epochs: int = 1500,
              sample_rate: float = SAMPLE_RATE, baseline: float = BASELINE,
              a_max: float = A_MAX, train_config: Optional[TrainConfig] = None) -> MLPWeights:
    """Fit the burst network so its convolved drive matches target SCR windows.

    ``inputs`` are normalised context rows (see :func:`context_vector`),
    ``targets`` the SCR samples of each 60-s window in µS.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float)) - baseline
    if targets.shape[0] != inputs.shape[0]:
        raise ValidationError("inputs and targets differ in length")
    if mode not in ("emotion", "action"):
        raise ValidationError("mode must be 'emotion' or 'action'")
    base_cfg = train_config or (EMOTION_TRAIN if mode == "emotion" else ACTION_TRAIN)
    cfg = replace(base_cfg, seed=seed, epochs=epochs if train_config is None else base_cfg.epochs)
    h = response_function(H_DURATION, sample_rate)

    def loss_fn(y, idx):
        return _window_loss_grad(y, targets[idx], h, sample_rate, a_max)

    w = neural.fit(neural.init_weights(scr_config(seed)), cfg, inputs, loss_fn)
    w.meta.update({"trained": True, "task": "scr", "a_max": a_max, "baseline": baseline,
                   "sample_rate": sample_rate, "mode": mode})
    return w
