"""ECG and arterial pressure waveforms from the limit-cycle dynamical model.

The state (x, y) circles an attracting unit limit cycle, one revolution
per RR interval; z collects Gaussian events placed at fixed angles
(P, Q, R, S, T). The same integrator with a second parameter block
produces the pressure pulse.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import numba
import numpy as np

from .cardio import RRISeries
from .dsp import WaveformChannel
from .errors import OriginError

ECG_RANGE = (-0.4, 1.2)  # mV
BP_WINDOW = 60.0         # s
WARMUP = 12.0            # s, z relaxes at rate 1/s


@dataclass(frozen=True)
class WaveParams:
    theta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    wander_amplitude: float = 0.0
    applies_to: str = "ECG"
    waves: tuple = ("P", "Q", "R", "S", "T")


def load_wave_params(which: str, path=None) -> WaveParams:
    if path is None:
        text = resources.files("physiosynth.data").joinpath("wave_params.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    block = json.loads(text)[which]
    b = np.array(block["b"], dtype=float)
    if b.size != 5 or np.any(b <= 0):
        raise ValueError("wave parameters need five positive widths")
    return WaveParams(np.pi * np.array(block["theta_over_pi"], dtype=float),
                      np.array(block["a"], dtype=float), b,
                      float(block["wander_amplitude_mv"]), which, tuple(block["waves"]))


ECG_PARAMS = load_wave_params("ECG")
BP_PARAMS = load_wave_params("BP")


@numba.njit(cache=True)
def _deriv(x, y, z, omega, z0, theta_i, a_i, b_i):
    r = np.sqrt(x * x + y * y)
    alpha = 1.0 - r
    theta = np.arctan2(y, x)
    dz = -(z - z0)
    for i in range(theta_i.size):
        # wrap to (-pi, pi]
        d = theta - theta_i[i]
        d = d - 2.0 * np.pi * np.ceil((d - np.pi) / (2.0 * np.pi))
        dz -= a_i[i] * d * np.exp(-d * d / (2.0 * b_i[i] * b_i[i]))
    return alpha * x - omega * y, alpha * y + omega * x, dz


def wrap_angle(d):
    """Map angles to (-pi, pi]."""
    d = np.asarray(d, dtype=float)
    return d - 2.0 * np.pi * np.ceil((d - np.pi) / (2.0 * np.pi))


def dyn_derivatives(state, omega: float, z0: float, params: WaveParams):
    x, y, z = (float(v) for v in state)
    if x == 0.0 and y == 0.0:
        raise OriginError("phase is undefined at the origin")
    return _deriv(x, y, z, float(omega), float(z0), params.theta, params.a, params.b)


@numba.njit(cache=True)
def _integrate(x, y, z, omega_half, h, n_steps, decim, theta_i, a_i, b_i):
    n_out = n_steps // decim
    xs = np.empty(n_out)
    ys = np.empty(n_out)
    zs = np.empty(n_out)
    k = 0
    for i in range(n_steps):
        if i % decim == 0:
            xs[k] = x
            ys[k] = y
            zs[k] = z
            k += 1
        w0 = omega_half[2 * i]
        w1 = omega_half[2 * i + 1]
        w2 = omega_half[2 * i + 2]
        k1x, k1y, k1z = _deriv(x, y, z, w0, 0.0, theta_i, a_i, b_i)
        k2x, k2y, k2z = _deriv(x + 0.5 * h * k1x, y + 0.5 * h * k1y, z + 0.5 * h * k1z,
                               w1, 0.0, theta_i, a_i, b_i)
        k3x, k3y, k3z = _deriv(x + 0.5 * h * k2x, y + 0.5 * h * k2y, z + 0.5 * h * k2z,
                               w1, 0.0, theta_i, a_i, b_i)
        k4x, k4y, k4z = _deriv(x + h * k3x, y + h * k3y, z + h * k3z,
                               w2, 0.0, theta_i, a_i, b_i)
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
    return xs, ys, zs, x, y, z


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    beat_onsets: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        return np.arctan2(self.y, self.x)

    @property
    def radius(self) -> np.ndarray:
        return np.hypot(self.x, self.y)


def omega_schedule(rri: RRISeries, times: np.ndarray) -> np.ndarray:
    """Angular speed 2*pi/RRI of the beat active at each time."""
    k = np.searchsorted(rri.t_onset, times, side="right") - 1
    k = np.clip(k, 0, len(rri) - 1)
    return 2.0 * np.pi / rri.rri[k]


def _warm_state(rri0: float, sample_rate: float, params: WaveParams, warmup: float):
    """State after whole revolutions at ``rri0`` lasting at least ``warmup`` s."""
    start = (-1.0, 0.0, 0.0)
    if warmup <= 0:
        return start
    h = 1.0 / (2 * sample_rate)
    n_steps = int(round(np.ceil(warmup / rri0) * rri0 / h))
    omega = np.full(2 * n_steps + 1, 2.0 * np.pi / rri0)
    *_, x, y, z = _integrate(*start, omega, h, n_steps, 2, params.theta, params.a, params.b)
    return x, y, z


def integrate_trajectory(rri: RRISeries, sample_rate: float, params: WaveParams,
                         duration: Optional[float] = None,
                         state0=None, warmup: float = WARMUP) -> Trajectory:
    """RK4 integration at step 1/(2*sample_rate), decimated to ``sample_rate``.

    The orbit starts at angle pi (between T and P), so beat ``k`` occupies
    one revolution starting at ``rri.t_onset[k]`` with the R event half an
    interval later. The angular speed switches at the scheduled onsets.

    Without ``state0`` the system first runs whole revolutions at the first
    interval for at least ``warmup`` seconds so z starts on its periodic
    orbit instead of showing a start-up transient.
    """
    if len(rri) == 0:
        raise ValueError("empty RR-interval series")
    if state0 is None:
        state0 = _warm_state(float(rri.rri[0]), sample_rate, params, warmup)
    if duration is None:
        duration = rri.end
    n_out = int(round(duration * sample_rate))
    decim = 2
    h = 1.0 / (decim * sample_rate)
    n_steps = n_out * decim
    half_times = np.arange(2 * n_steps + 1) * (h / 2.0)
    omega_half = omega_schedule(rri, half_times)
    x0, y0, z0 = (float(v) for v in state0)
    xs, ys, zs, *_ = _integrate(x0, y0, z0, omega_half, h, n_steps, decim,
                                params.theta, params.a, params.b)
    t = np.arange(n_out) / sample_rate
    onsets = rri.t_onset[rri.t_onset < duration]
    return Trajectory(t, xs, ys, zs, onsets)


def rescale(x, lo: float, hi: float) -> np.ndarray:
    """Affine map of ``[min(x), max(x)]`` onto ``[lo, hi]``; a constant maps
    to the midpoint."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x.copy()
    mn, mx = x.min(), x.max()
    if mx == mn:
        return np.full_like(x, 0.5 * (lo + hi))
    out = lo + (x - mn) * (hi - lo) / (mx - mn)
    # pin the extremes exactly
    out[x == mn] = lo
    out[x == mx] = hi
    return out


def resp_phase(resp_freq_series, times: np.ndarray) -> np.ndarray:
    """Integrated respiratory phase (rad) for a per-second frequency series (Hz)."""
    f = np.atleast_1d(np.asarray(resp_freq_series, dtype=float))
    inst = np.interp(times, np.arange(f.size), f)
    dt = np.diff(times, prepend=times[0] if times.size else 0.0)
    return 2.0 * np.pi * np.cumsum(inst * dt)


def synthesize_ecg(rri: RRISeries, resp_freq_series, sample_rate: float = 256.0,
                   params: WaveParams = ECG_PARAMS, duration: Optional[float] = None,
                   trajectory: bool = False):
    """ECG in mV: the z trace mapped onto [-0.4, 1.2] mV plus baseline wander
    ``A*sin(2*pi*f2*t)`` at the respiratory frequency ``f2``."""
    traj = integrate_trajectory(rri, sample_rate, params, duration)
    ecg = rescale(traj.z, *ECG_RANGE)
    ecg = ecg + params.wander_amplitude * np.sin(resp_phase(resp_freq_series, traj.t))
    ch = WaveformChannel("ecg", sample_rate, "mV", ecg)
    return (ch, traj) if trajectory else ch


def bp_range(mean_rri: float) -> tuple[float, float]:
    return 110.0 - 30.0 * mean_rri, 200.0 - 80.0 * mean_rri


def synthesize_bp(rri: RRISeries, sample_rate: float = 256.0, params: WaveParams = BP_PARAMS,
                  duration: Optional[float] = None, window: float = BP_WINDOW,
                  trajectory: bool = False):
    """Arterial pressure (mmHg), rescaled window by window to the range set
    by that window's mean RR interval."""
    traj = integrate_trajectory(rri, sample_rate, params, duration)
    z = traj.z
    out = np.empty_like(z)
    n_win = max(int(np.ceil(z.size / (window * sample_rate))), 1)
    w = int(round(window * sample_rate))
    for k in range(n_win):
        s = slice(k * w, min((k + 1) * w, z.size))
        t0, t1 = k * window, (k + 1) * window
        sel = (rri.t_onset >= t0) & (rri.t_onset < t1)
        mean_rri = rri.rri[sel].mean() if sel.any() else rri.rri.mean()
        out[s] = rescale(z[s], *bp_range(mean_rri))
    ch = WaveformChannel("bp", sample_rate, "mmHg", out)
    return (ch, traj) if trajectory else ch
