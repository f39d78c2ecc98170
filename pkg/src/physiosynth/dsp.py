"""Signal processing and feature extraction shared by synthesis and evaluation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import optimize, signal as sps, stats

from .errors import (AllZeroError, BandError, NoBeatsError, TooFewBeatsError,
                     TooShortError)


@dataclass
class WaveformChannel:
    """A uniformly sampled signal starting at t = 0."""

    name: str
    sample_rate: float
    unit: str
    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.samples)) / self.sample_rate


class Direction(str, enum.Enum):
    UP = "up"
    DOWN = "down"
    NONE = "none"


# --- transforms -------------------------------------------------------------

def dft(x) -> np.ndarray:
    return np.fft.fft(np.asarray(x))


def idft(spectrum) -> np.ndarray:
    return np.fft.ifft(np.asarray(spectrum))


def detrend(x) -> np.ndarray:
    """Remove the least-squares straight line."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return x - x.mean() if x.size else x.copy()
    return sps.detrend(x, type="linear")


def bandpass(x, sample_rate: float, lo: float, hi: float) -> np.ndarray:
    """Ideal FFT-mask band-pass keeping ``lo <= f <= hi``."""
    if not 0 <= lo < hi < sample_rate / 2:
        raise BandError(f"need 0 <= lo < hi < {sample_rate / 2}, got ({lo}, {hi})")
    x = np.asarray(x, dtype=float)
    spec = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(x.size, 1.0 / sample_rate)
    spec[(freqs < lo) | (freqs > hi)] = 0.0
    return np.fft.irfft(spec, n=x.size)


def detrend_bandpass(x, sample_rate: float, lo: float, hi: float) -> np.ndarray:
    if not 0 <= lo < hi < sample_rate / 2:
        raise BandError(f"need 0 <= lo < hi < {sample_rate / 2}, got ({lo}, {hi})")
    return bandpass(detrend(x), sample_rate, lo, hi)


def dominant_frequency(x, sample_rate: float, lo: float, hi: float) -> float:
    """Frequency of the largest in-band FFT magnitude.

    Ties (within 1e-9 relative) resolve toward the lower frequency.
    """
    x = np.asarray(x, dtype=float)
    if lo <= 0 or x.size / sample_rate < 2.0 / lo:
        raise TooShortError(f"window of {x.size / sample_rate:.2f} s is shorter than 2/lo")
    mag = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(x.size, 1.0 / sample_rate)
    band = (freqs >= lo) & (freqs <= hi)
    if not band.any():
        raise AllZeroError("no FFT bins inside the band")
    mag_b = mag[band]
    peak = mag_b.max()
    if peak <= 1e-12 * max(1.0, np.abs(x).max(initial=0.0)) * x.size:
        raise AllZeroError("no in-band energy")
    first = np.flatnonzero(mag_b >= peak * (1 - 1e-9))[0]
    return float(freqs[band][first])


def _sine_fit_power(x, t, freqs):
    """Variance explained by the best ``c + d*t + A cos + B sin`` fit at each
    frequency (the constant/trend columns are fit jointly)."""
    n = x.size
    tc = t - t.mean()
    base = np.stack([np.ones(n), tc / (np.abs(tc).max() or 1.0)])  # (2, n)
    wt = 2 * np.pi * np.outer(freqs, t)
    cols = np.stack([np.cos(wt), np.sin(wt)], axis=1)  # (F, 2, n)
    design = np.concatenate([np.broadcast_to(base, (freqs.size, 2, n)), cols], axis=1)
    gram = design @ design.transpose(0, 2, 1)
    rhs = design @ x
    coef = np.linalg.solve(gram + 1e-12 * np.eye(4), rhs[..., None])[..., 0]
    fitted = np.einsum("fk,fkn->fn", coef, design)
    trend = base.T @ np.linalg.lstsq(base.T, x, rcond=None)[0]
    resid_trend = np.sum((x - trend) ** 2)
    return resid_trend - np.sum((x - fitted) ** 2, axis=1)


def sine_fit_frequency(x, sample_rate: float, lo: float, hi: float,
                       grid_step: float = 0.005) -> float:
    """Dominant in-band frequency of a short window.

    Uses the least-squares sinusoid spectrum (sinusoid plus linear trend
    fit jointly at each trial frequency), scanned on a grid and refined
    with a bounded scalar search. Unlike an FFT argmax its resolution does
    not depend on the window length, which matters for the 6-s windows
    used for breathing rate.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 8:
        raise TooShortError("need at least 8 samples")
    if not np.any(np.abs(x - x.mean()) > 0):
        raise AllZeroError("window is constant")
    t = np.arange(x.size) / sample_rate
    freqs = np.arange(lo, hi + grid_step / 2, grid_step)
    power = _sine_fit_power(x, t, freqs)
    k = int(np.argmax(power))
    a = freqs[max(k - 1, 0)]
    b = freqs[min(k + 1, freqs.size - 1)]
    if b <= a:
        return float(freqs[k])
    res = optimize.minimize_scalar(
        lambda f: -_sine_fit_power(x, t, np.array([f]))[0],
        bounds=(a, b), method="bounded", options={"xatol": 1e-6})
    best = res.x if -res.fun >= power[k] else freqs[k]
    return float(best)


# --- ECG / BP beat analysis ---------------------------------------------------

def detect_r_peaks(ecg: WaveformChannel, refractory: float = 0.25,
                   block: float = 10.0) -> np.ndarray:
    """R-peak times (s) of a clean synthesized ECG.

    The threshold is the 60th percentile plus half the distance from it to
    the maximum, computed in consecutive ``block``-second segments so
    that amplitude changes with heart rate do not hide beats.
    """
    x = ecg.samples
    fs = ecg.sample_rate
    if x.size < 3:
        raise NoBeatsError("signal too short")
    thr = np.empty_like(x)
    step = max(int(round(block * fs)), 1)
    for start in range(0, x.size, step):
        seg = x[start:start + step]
        # short tail blocks borrow the previous block's statistics
        if seg.size < step // 2 and start > 0:
            seg = x[max(0, start - step):start + step]
        p60 = np.percentile(seg, 60)
        thr[start:start + step] = p60 + 0.5 * (seg.max() - p60)
    distance = max(int(round(refractory * fs)), 1)
    peaks, _ = sps.find_peaks(x, height=thr, distance=distance)
    peaks = peaks[x[peaks] > thr[peaks]]
    if peaks.size == 0:
        raise NoBeatsError("no R peaks found")
    return peaks / fs


def bp_beat_boundaries(r_peaks) -> np.ndarray:
    """Cycle boundaries for pressure pulses: midpoints between R peaks."""
    r = np.asarray(r_peaks, dtype=float)
    if r.size < 2:
        raise TooFewBeatsError("need at least two R peaks")
    return 0.5 * (r[1:] + r[:-1])


@dataclass
class BeatPressure:
    sbp: np.ndarray
    dbp: np.ndarray
    lvet: np.ndarray
    degraded: np.ndarray  # True where the notch fallback was used


def beat_pressure_features(bp: WaveformChannel, beats) -> BeatPressure:
    """Per-beat SBP, DBP and LVET for the cycles between consecutive ``beats``.

    LVET runs from the pressure foot (minimum before the systolic peak) to
    the dicrotic notch (most prominent local minimum after the peak). If
    the cycle has no interior minimum after the peak, LVET falls back to
    0.37 * cycle length and the beat is flagged as degraded.
    """
    beats = np.asarray(beats, dtype=float)
    if beats.size < 2:
        raise TooFewBeatsError("need at least two beat boundaries")
    x = bp.samples
    fs = bp.sample_rate
    sbp, dbp, lvet, degraded = [], [], [], []
    for t0, t1 in zip(beats[:-1], beats[1:]):
        i0 = int(np.ceil(t0 * fs))
        i1 = min(int(np.ceil(t1 * fs)), x.size)
        seg = x[i0:i1]
        if seg.size < 3:
            continue
        ipk = int(np.argmax(seg))
        ifoot = int(np.argmin(seg[:ipk + 1]))
        sbp.append(seg.max())
        dbp.append(seg.min())
        tail = seg[ipk:]
        mins, props = sps.find_peaks(-tail, prominence=0.0)
        if mins.size:
            inotch = ipk + int(mins[np.argmax(props["prominences"])])
            lvet.append((inotch - ifoot) / fs)
            degraded.append(False)
        else:
            lvet.append(0.37 * (t1 - t0))
            degraded.append(True)
    if not sbp:
        raise TooFewBeatsError("no complete beat cycles inside the signal")
    return BeatPressure(np.array(sbp), np.array(dbp), np.array(lvet), np.array(degraded))


def sdnn(rri, onsets=None, window: float = 60.0) -> np.ndarray:
    """Population SD of RR intervals in consecutive ``window``-second spans.

    ``rri`` may be an :class:`~physiosynth.cardio.RRISeries` or an array
    paired with ``onsets``.
    """
    if onsets is None:
        onsets = rri.t_onset
        rri = rri.rri
    rri = np.asarray(rri, dtype=float)
    onsets = np.asarray(onsets, dtype=float)
    if rri.size < 2:
        raise TooFewBeatsError("need at least two beats")
    span = onsets[-1] - onsets[0]
    n_win = max(int(np.floor(span / window + 1e-9)), 1)
    out = []
    for k in range(n_win):
        lo = onsets[0] + k * window
        sel = (onsets >= lo) & (onsets < lo + window) if n_win > 1 else slice(None)
        vals = rri[sel]
        if vals.size < 2:
            raise TooFewBeatsError(f"window {k} holds fewer than two beats")
        out.append(vals.std())
    return np.array(out)


# --- windowed features -------------------------------------------------------

FEATURES_6 = ("mean", "std", "mean_abs_diff1", "mean_abs_diff2",
              "mean_abs_diff1_norm", "mean_abs_diff2_norm")
FEATURES_13 = FEATURES_6 + ("median", "min", "max", "range", "variance",
                            "skewness", "kurtosis")


def _window_features(w: np.ndarray, variant: int) -> dict:
    mu, sd = w.mean(), w.std()
    d1 = np.diff(w)
    d2 = np.diff(w, n=2)
    norm = (w - mu) / sd if sd > 0 else np.zeros_like(w)
    feats = {
        "mean": mu,
        "std": sd,
        "mean_abs_diff1": np.abs(d1).mean() if d1.size else 0.0,
        "mean_abs_diff2": np.abs(d2).mean() if d2.size else 0.0,
        "mean_abs_diff1_norm": np.abs(np.diff(norm)).mean() if d1.size else 0.0,
        "mean_abs_diff2_norm": np.abs(np.diff(norm, n=2)).mean() if d2.size else 0.0,
    }
    if variant == 13:
        flat = sd == 0
        feats.update({
            "median": float(np.median(w)),
            "min": w.min(),
            "max": w.max(),
            "range": w.max() - w.min(),
            "variance": w.var(),
            "skewness": 0.0 if flat else float(stats.skew(w)),
            "kurtosis": 0.0 if flat else float(stats.kurtosis(w)),
        })
    return {k: float(v) for k, v in feats.items()}


def window_feature_vector(x, sample_rate: float, window: float = 6.0,
                          overlap: float = 0.5, variant: int = 6) -> list[dict]:
    """Per-window feature dicts over sliding windows (default 6 s, 50 % overlap)."""
    if variant not in (6, 13):
        raise ValueError("variant must be 6 or 13")
    x = np.asarray(x, dtype=float)
    w = int(round(window * sample_rate))
    hop = max(int(round(w * (1 - overlap))), 1)
    if w < 1 or x.size < w:
        raise TooShortError(f"signal shorter than one {window}-s window")
    return [_window_features(x[s:s + w], variant)
            for s in range(0, x.size - w + 1, hop)]


# --- evaluation helpers -------------------------------------------------------

def direction_of_change(deltas: Mapping[str, float] | Sequence[float]):
    """Classify per-emotion changes with the 10 %-of-extremes rule.

    ``up`` when the change exceeds a tenth of the largest change, ``down``
    when it is below a tenth of the smallest; equality counts as ``none``.
    Accepts a mapping (returns a mapping) or a sequence (returns a list).
    """
    if isinstance(deltas, Mapping):
        keys = list(deltas)
        vals = np.array([deltas[k] for k in keys], dtype=float)
    else:
        keys = None
        vals = np.asarray(deltas, dtype=float)
    up_thr = 0.1 * vals.max()
    down_thr = 0.1 * vals.min()
    dirs = [Direction.UP if v > up_thr else Direction.DOWN if v < down_thr else Direction.NONE
            for v in vals]
    return dict(zip(keys, dirs)) if keys is not None else dirs


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("need two equally long series of length >= 2")
    return float(stats.pearsonr(a, b)[0])
