"""Breathing rate from heart rate and emotion, respiration waveform, RR extraction.

Activity reaches breathing through oxygen uptake: HR gives VO2, CO2
output is taken equal to VO2, that fixes alveolar ventilation, and the
breathing frequency is the one minimising the mechanical work of breathing
for that ventilation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import dsp, neural
from .dsp import WaveformChannel
from .errors import TooShortError, UntrainedError
from .neural import MLPWeights
from .scenario import SubjectProfile, hr_bounds, normalize_affect

RR_FLOOR = 4.0
RR_CEIL = 60.0
VO2_REST_FLOOR = 0.25  # L/min
BAND = (0.1, 0.9)      # Hz


@dataclass(frozen=True)
class RespParams:
    k_prime: float = 5.1      # lung elastance
    k_dprime: float = 4.52    # airway resistance factor
    p_aco2: float = 40.0      # mmHg


@dataclass(frozen=True)
class VentilationState:
    vo2: float
    vco2: float
    va: float
    vd: float
    rr: float


def vo2max(age: float, gender: str, offset: float = 0.0) -> float:
    """Maximal oxygen uptake in L/min."""
    if gender == "male":
        base = 4.2 - 0.032 * age
    elif gender == "female":
        base = 2.6 - 0.014 * age
    else:
        raise ValueError(f"unknown gender {gender!r}")
    return max(base + offset, 0.5)


def vo2_from_hr(hr, hr_max: float, vo2max_: float):
    out = np.maximum(vo2max_ * (np.asarray(hr, dtype=float) / hr_max - 0.3718) / 0.6463,
                     VO2_REST_FLOOR)
    return float(out) if out.ndim == 0 else out


def alveolar_ventilation(vco2, p_aco2: float = 40.0):
    """Alveolar ventilation (L/min) for a CO2 output in L/min."""
    out = 0.868 * (np.asarray(vco2, dtype=float) * 1000.0) / p_aco2
    return float(out) if np.ndim(out) == 0 else out


def dead_space(va_lps):
    """Dead-space volume (L) for alveolar ventilation in L/s."""
    return 0.1698 * np.asarray(va_lps, dtype=float) + 0.1587


def optimal_rr(va, params: RespParams = RespParams()):
    """Minimum-work breathing rate (breaths/min) for ``va`` in L/min.

    Ventilation enters the dead-space and work-rate expressions in L/s and
    the optimum comes out in breaths/s. Clamped to [4, 60].
    """
    va_s = np.maximum(np.asarray(va, dtype=float), 0.0) / 60.0
    vd = dead_space(va_s)
    k1, k2 = params.k_prime, params.k_dprime
    f = (-k1 * vd + np.sqrt(k1 ** 2 * vd ** 2 + 32.0 * k1 * k2 * vd * va_s)) / (16.0 * k2 * vd)
    out = np.clip(f * 60.0, RR_FLOOR, RR_CEIL)
    return float(out) if out.ndim == 0 else out


def ventilation(hr, profile: SubjectProfile, params: RespParams = RespParams()) -> VentilationState:
    _, hr_max = hr_bounds(profile)
    vmax = vo2max(profile.age, profile.gender, profile.vo2max_offset)
    vo2 = vo2_from_hr(min(float(hr), hr_max), hr_max, vmax)
    va = alveolar_ventilation(vo2, params.p_aco2)
    return VentilationState(vo2, vo2, va, float(dead_space(va / 60.0)), optimal_rr(va, params))


def rr_from_hr(hr, profile: SubjectProfile, params: RespParams = RespParams()):
    """Breathing rate (breaths/min) implied by heart rate through the VO2 chain."""
    _, hr_max = hr_bounds(profile)
    vmax = vo2max(profile.age, profile.gender, profile.vo2max_offset)
    vo2 = vo2_from_hr(np.minimum(hr, hr_max), hr_max, vmax)
    return optimal_rr(alveolar_ventilation(vo2, params.p_aco2), params)


def emotion_rr_delta(weights: Optional[MLPWeights], valence, arousal):
    if weights is None or not weights.meta.get("trained"):
        raise UntrainedError("breathing-rate emotion model has not been trained")
    x = np.stack(np.broadcast_arrays(normalize_affect(valence), normalize_affect(arousal)), -1)
    y = neural.forward(weights, x.reshape(-1, 2))
    d = neural.decode_symmetric(y[:, 0], weights.meta["output_scale"][0])
    return float(d[0]) if np.ndim(valence) == 0 and np.ndim(arousal) == 0 else \
        d.reshape(np.shape(x)[:-1])


def synthesize_resp(rr_series, sample_rate: float = 32.0, seed: int = 0,
                    drift: float = 0.1) -> WaveformChannel:
    """Continuous-phase breathing oscillation for a per-second rate series.

    The instantaneous rate is linearly interpolated between the per-second
    values, so phase never jumps. A slow seeded drift (< 0.05 Hz) is added
    with amplitude ``drift``.
    """
    rr = np.asarray(rr_series, dtype=float)
    n = int(round(rr.size * sample_rate))
    if n == 0:
        return WaveformChannel("resp", sample_rate, "a.u.", np.zeros(0))
    t = np.arange(n) / sample_rate
    rate = np.interp(t, np.arange(rr.size), rr) / 60.0
    phase = 2 * np.pi * np.concatenate([[0.0], np.cumsum(rate[:-1]) / sample_rate])
    x = np.sin(phase)
    if drift:
        rng = np.random.default_rng(seed)
        freqs = rng.uniform(0.005, 0.05, 3)
        phases = rng.uniform(0, 2 * np.pi, 3)
        x = x + drift / 3.0 * np.sin(2 * np.pi * np.outer(t, freqs) + phases).sum(axis=1)
    return WaveformChannel("resp", sample_rate, "a.u.", x)


def extract_rr(channel: WaveformChannel, window: float = 6.0, hop: float = 1.0,
               band: tuple = BAND) -> np.ndarray:
    """Breathing rate (breaths/min) per sliding window.

    The whole record is detrended and band-passed first; each window's
    dominant frequency is then found with :func:`dsp.sine_fit_frequency`.
    """
    fs = channel.sample_rate
    x = channel.samples
    w = int(round(window * fs))
    if x.size < w:
        raise TooShortError(f"signal shorter than the {window}-s window")
    filt = dsp.detrend_bandpass(x, fs, *band)
    step = max(int(round(hop * fs)), 1)
    out = [dsp.sine_fit_frequency(filt[s:s + w], fs, *band) * 60.0
           for s in range(0, x.size - w + 1, step)]
    return np.array(out)
