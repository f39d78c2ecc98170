"""Heart-rate kinetics driven by activity and emotion, and RR-interval series.

Heart rate relaxes toward a Karvonen demand (plus the emotion offset)
through a saturating first-order ODE whose rate is slowed near the
subject's minimum and maximum heart rates and sped up by blood lactate.
The resulting HR trace is turned into beat-by-beat RR intervals with
band-limited variability.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import neural
from .errors import LambdaZeroError, UntrainedError
from .neural import MLPWeights
from .resp import vo2max
from .scenario import REST_MET, SubjectProfile, hr_bounds, normalize_affect

K0 = 0.03           # 1/s, base relaxation rate
C_LACTATE = 1.0     # relative speed-up per unit lactate intensity
CONTROL_RATE = 4.0  # Hz
V_MAX_PER_SQRT_LAMBDA = 40.0
INTENSITY_CAP = 1.5
BASELINE_SDNN = 0.03  # s
MAYER_HZ = 0.1


@dataclass(frozen=True)
class CardioState:
    hr: float
    v: float = 0.0
    lactate: float = 0.0
    t: float = 0.0


@dataclass
class RRISeries:
    rri: np.ndarray
    t_onset: np.ndarray

    def __post_init__(self):
        self.rri = np.asarray(self.rri, dtype=float)
        self.t_onset = np.asarray(self.t_onset, dtype=float)

    def __len__(self):
        return self.rri.size

    @property
    def end(self) -> float:
        return float(self.t_onset[-1] + self.rri[-1]) if self.rri.size else 0.0

    @classmethod
    def constant(cls, rri: float, duration: float) -> "RRISeries":
        n = int(np.ceil(duration / rri - 1e-9))
        return cls(np.full(n, rri), np.arange(n) * rri)


@dataclass(frozen=True)
class EmotionDelta:
    delta_hr: float
    delta_hrv: float


def exercise_intensity(v, lambda_: float):
    """Velocity relative to the subject's maximum achievable velocity."""
    if lambda_ <= 0:
        raise LambdaZeroError("lambda must be > 0 to define a maximum velocity")
    v_max = V_MAX_PER_SQRT_LAMBDA * np.sqrt(lambda_)
    out = np.clip(np.asarray(v, dtype=float) / v_max, 0.0, INTENSITY_CAP)
    return float(out) if out.ndim == 0 else out


def lactate_intensity(ip):
    ip = np.asarray(ip, dtype=float)
    out = ip - np.arctan(ip)
    return float(out) if out.ndim == 0 else out


def karvonen_demand(profile: SubjectProfile, intensity):
    _, hr_max = hr_bounds(profile)
    return profile.hr_rest + np.asarray(intensity, dtype=float) * (hr_max - profile.hr_rest)


def met_intensity(profile: SubjectProfile, met):
    """Fraction of the subject's MET reserve used by an activity.

    The peak MET comes from the subject's VO2max (L/min) and body mass,
    with 1 MET = 3.5 mL O2/kg/min.
    """
    peak = vo2max(profile.age, profile.gender, profile.vo2max_offset) * 1000.0 / \
        (3.5 * profile.body_mass)
    frac = (np.asarray(met, dtype=float) - REST_MET) / max(peak - REST_MET, 1e-6)
    return np.clip(frac, 0.0, 1.0)


def emotion_hr_delta(weights: Optional[MLPWeights], valence, arousal):
    """Heart-rate and SDNN offsets for an emotion (scalars or arrays)."""
    if weights is None or not weights.meta.get("trained"):
        raise UntrainedError("heart-rate emotion model has not been trained")
    x = np.stack(np.broadcast_arrays(normalize_affect(valence), normalize_affect(arousal)), -1)
    y = neural.forward(weights, x.reshape(-1, 2))
    d = neural.decode_symmetric(y, weights.meta["output_scale"])
    shape = np.shape(x)[:-1]
    if shape == ():
        return EmotionDelta(float(d[0, 0]), float(d[0, 1]))
    return EmotionDelta(d[:, 0].reshape(shape), d[:, 1].reshape(shape))


def _gain(hr, profile, hr_min, hr_max):
    g_min = np.clip((hr - hr_min) / (profile.hr_rest - hr_min), 0.0, 1.0)
    g_max = np.clip((hr_max - hr) / (hr_max - profile.hr_rest), 0.0, 1.0)
    return g_min * g_max


def hr_derivative(hr: float, demand: float, lactate: float, profile: SubjectProfile,
                  bounds: Optional[tuple] = None) -> float:
    hr_min, hr_max = bounds or hr_bounds(profile)
    k = K0 * (1.0 + C_LACTATE * lactate)
    return k * (demand - hr) * _gain(hr, profile, hr_min, hr_max)


def step_hr_kinetics(state: CardioState, demand: float, dt: float,
                     profile: SubjectProfile) -> CardioState:
    """Advance heart rate by one RK4 step of length ``dt``.

    Lactate intensity follows from the state's velocity and is held fixed
    over the step; the new HR is clamped to the subject's bounds.
    """
    bounds = hr_bounds(profile)
    if state.v <= 0:
        ip = 0.0
    elif profile.lambda_ <= 0:
        ip = INTENSITY_CAP  # zero maximum velocity: any motion saturates
    else:
        ip = exercise_intensity(state.v, profile.lambda_)
    lac = lactate_intensity(ip)
    f = lambda h: hr_derivative(h, demand, lac, profile, bounds)  # noqa: E731
    h = state.hr
    k1 = f(h)
    k2 = f(h + 0.5 * dt * k1)
    k3 = f(h + 0.5 * dt * k2)
    k4 = f(h + dt * k3)
    h_new = h + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    h_new = float(np.clip(h_new, bounds[0], bounds[1]))
    return replace(state, hr=h_new, lactate=lac, t=state.t + dt)


def simulate_hr(demand, velocity, profile: SubjectProfile, dt: float = 1.0 / CONTROL_RATE,
                hr0: Optional[float] = None) -> np.ndarray:
    """HR trace on the control grid; ``demand[k]`` and ``velocity[k]`` apply
    over step ``k``. Returns one more sample than the inputs (the start)."""
    demand = np.asarray(demand, dtype=float)
    velocity = np.broadcast_to(np.asarray(velocity, dtype=float), demand.shape)
    hr_min, hr_max = hr_bounds(profile)
    demand = np.clip(demand, hr_min + 1e-9, hr_max)
    state = CardioState(profile.hr_rest if hr0 is None else hr0)
    out = np.empty(demand.size + 1)
    out[0] = state.hr
    for k in range(demand.size):
        state = replace(state, v=float(velocity[k]))
        state = step_hr_kinetics(state, float(demand[k]), dt, profile)
        out[k + 1] = state.hr
    return out


def hrv_noise(duration: float, seed: int, resp_hz: float = 0.25, rate: float = CONTROL_RATE,
              lf_hf_ratio: float = 0.5, width_hz: float = 0.02) -> np.ndarray:
    """Unit-variance band-limited noise with Mayer-wave and respiratory peaks.

    Built by inverse FFT of a two-Gaussian power spectrum with random
    phases; sampled at ``rate`` Hz over ``duration`` seconds (+1 sample).
    """
    n = int(np.ceil(duration * rate)) + 1
    n_fft = max(int(2 ** np.ceil(np.log2(max(n, 16)))), 16)
    rng = np.random.default_rng(seed)
    f = np.fft.rfftfreq(n_fft, 1.0 / rate)
    psd = lf_hf_ratio * np.exp(-0.5 * ((f - MAYER_HZ) / width_hz) ** 2) + \
        np.exp(-0.5 * ((f - resp_hz) / width_hz) ** 2)
    phase = rng.uniform(0, 2 * np.pi, f.size)
    spec = np.sqrt(psd) * np.exp(1j * phase)
    spec[0] = 0.0
    x = np.fft.irfft(spec, n=n_fft)[:n]
    x -= x.mean()
    sd = x.std()
    return x / sd if sd > 0 else x


def build_rri_series(hr_series, delta_hrv_series, profile: SubjectProfile,
                     seed: Optional[int] = None, baseline_sdnn: float = BASELINE_SDNN,
                     resp_hz: float = 0.25, variability: bool = True,
                     duration: Optional[float] = None) -> RRISeries:
    """Beat onsets and RR intervals from a per-second HR trace.

    Each interval is 60/HR at its onset plus a variability term whose SD
    is ``baseline_sdnn + delta_hrv`` (floored at 0); intervals are clamped
    to the subject's HR bounds.
    """
    hr = np.asarray(hr_series, dtype=float)
    dhrv = np.broadcast_to(np.asarray(delta_hrv_series, dtype=float), hr.shape)
    if duration is None:
        duration = float(hr.size)
    seed = profile.seed if seed is None else seed
    hr_min, hr_max = hr_bounds(profile)
    grid = np.arange(hr.size, dtype=float)
    noise = hrv_noise(duration, seed, resp_hz) if variability else None
    rri_lo, rri_hi = 60.0 / hr_max, 60.0 / hr_min
    onsets, rris = [], []
    t = 0.0
    while t < duration:
        h = np.interp(t, grid, hr)
        r = 60.0 / h
        if variability:
            sd = max(0.0, baseline_sdnn + float(np.interp(t, grid, dhrv)))
            r += sd * float(np.interp(t * CONTROL_RATE, np.arange(noise.size), noise))
        r = min(max(r, rri_lo), rri_hi)
        onsets.append(t)
        rris.append(r)
        t += r
    return RRISeries(np.array(rris), np.array(onsets))
