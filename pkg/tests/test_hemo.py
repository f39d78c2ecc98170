import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from physiosynth.cardio import RRISeries
from physiosynth.dsp import bp_beat_boundaries, beat_pressure_features, detect_r_peaks
from physiosynth.errors import OriginError
from physiosynth.hemo import (BP_PARAMS, ECG_PARAMS, ECG_RANGE, WaveParams, bp_range,
                              dyn_derivatives, integrate_trajectory, load_wave_params, rescale,
                              synthesize_bp, synthesize_ecg, wrap_angle)

# term-by-term Gaussian sum at (1, 0, 0), evaluated with mpmath at 30 digits
DZ_GOLDEN = 0.00405780353981099371

# sign of each wave's z extremum: P max, Q min, R max, S min, T max
EXTREMUM_SIGN = (1, -1, 1, -1, 1)


def test_on_limit_cycle():
    dx, dy, _ = dyn_derivatives((1.0, 0.0, 0.3), 2.5, 0.0, ECG_PARAMS)
    assert dx == 0.0 and dy == 2.5


def test_pure_relaxation():
    zero = WaveParams(ECG_PARAMS.theta, np.zeros(5), ECG_PARAMS.b)
    assert dyn_derivatives((0.3, 0.4, 1.7), 1.0, 0.7, zero)[2] == pytest.approx(-1.0)


def test_dz_direct_summation():
    assert dyn_derivatives((1.0, 0.0, 0.0), 2 * np.pi, 0.0, ECG_PARAMS)[2] == \
        pytest.approx(DZ_GOLDEN, rel=1e-12)


def test_origin_error():
    with pytest.raises(OriginError):
        dyn_derivatives((0.0, 0.0, 0.0), 1.0, 0.0, ECG_PARAMS)


@given(st.floats(-50, 50))
def test_wrap_angle_range(d):
    w = float(wrap_angle(d))
    assert -np.pi < w <= np.pi
    assert np.isclose(np.cos(w), np.cos(d), atol=1e-9) and np.isclose(np.sin(w), np.sin(d), atol=1e-9)


def test_wave_params_table():
    assert ECG_PARAMS.a[2] == 30 and ECG_PARAMS.a[3] == -7.5
    assert BP_PARAMS.a[0] == 0 and BP_PARAMS.a[1] == 0 and BP_PARAMS.wander_amplitude == 0
    assert ECG_PARAMS.wander_amplitude == 0.15
    assert np.all(ECG_PARAMS.b > 0) and len(load_wave_params("BP").waves) == 5


def test_rescale_examples():
    np.testing.assert_allclose(rescale(np.linspace(0, 1, 11), -2, 3), np.linspace(-2, 3, 11))
    np.testing.assert_array_equal(rescale(np.full(5, 7.0), 1, 4), 2.5)
    x = np.random.default_rng(0).normal(size=100)
    y = rescale(x, 80, 120)
    assert y.min() == 80 and y.max() == 120
    with pytest.raises(ValueError):
        rescale(x, 1, 1)


def test_ecg_sixty_beats():
    ecg = synthesize_ecg(RRISeries.constant(1.0, 60), 0.25, 256)
    assert ecg.samples.size == 60 * 256 and ecg.unit == "mV"
    assert abs(detect_r_peaks(ecg).size - 60) <= 1


def test_ecg_extremum_angles_and_ordering():
    ecg, traj = synthesize_ecg(RRISeries.constant(1.0, 20), 0.25, 512, trajectory=True)
    theta = traj.theta
    beat = np.floor((traj.t + 0.5) / 1.0).astype(int)
    worst = 0.0
    for k in range(1, 19):
        sel = np.flatnonzero(beat == k)
        z = traj.z[sel]
        assert np.argmax(z) == np.argmin(np.abs(theta[sel]))  # R is the beat maximum
        assert abs(theta[sel][np.argmin(z)] - ECG_PARAMS.theta[3]) < 0.08  # S is the minimum
        for th, sign in zip(ECG_PARAMS.theta, EXTREMUM_SIGN):
            near = np.abs(wrap_angle(theta[sel] - th)) < 0.15
            i = np.argmax(sign * z[near])
            worst = max(worst, abs(float(wrap_angle(theta[sel][near][i] - th))))
    assert worst <= 0.08


def test_zero_amplitudes_give_pure_wander():
    flat = WaveParams(ECG_PARAMS.theta, np.zeros(5), ECG_PARAMS.b, 0.15)
    ecg = synthesize_ecg(RRISeries.constant(1.0, 20), 0.25, 256, params=flat)
    t = ecg.times
    np.testing.assert_allclose(ecg.samples, np.mean(ECG_RANGE) + 0.15 * np.sin(2 * np.pi * 0.25 * t),
                               atol=1e-9)
    assert np.ptp(ecg.samples) == pytest.approx(0.3, abs=1e-3)


def test_ecg_range_before_wander():
    flat = WaveParams(ECG_PARAMS.theta, ECG_PARAMS.a, ECG_PARAMS.b, 0.0)
    ecg = synthesize_ecg(RRISeries.constant(0.8, 30), 0.25, 256, params=flat)
    assert ecg.samples.min() == ECG_RANGE[0] and ecg.samples.max() == ECG_RANGE[1]


def test_bp_range_formula():
    assert bp_range(1.0) == (80.0, 120.0)
    assert bp_range(0.5) == (95.0, 160.0)


def test_bp_levels_at_one_second():
    rri = RRISeries.constant(1.0, 60)
    bp = synthesize_bp(rri, 256)
    ecg = synthesize_ecg(rri, 0.25, 256)
    feats = beat_pressure_features(bp, bp_beat_boundaries(detect_r_peaks(ecg)))
    assert feats.sbp.mean() == pytest.approx(120, abs=5)
    assert feats.dbp.mean() == pytest.approx(80, abs=5)


def test_bp_pulse_period():
    bp = synthesize_bp(RRISeries.constant(0.75, 30), 256)
    from scipy.signal import find_peaks
    pk, _ = find_peaks(bp.samples, distance=int(0.5 * 256))
    assert np.all(np.abs(np.diff(pk) - 0.75 * 256) <= 1)


def test_bp_no_p_or_q_deflection():
    _, traj = synthesize_bp(RRISeries.constant(1.0, 20), 256, trajectory=True)
    sel = (traj.t > 10) & (traj.t < 11) & (np.abs(wrap_angle(traj.theta - BP_PARAMS.theta[0])) < 0.2)
    # with a_P = 0 the z trace is a smooth exponential tail there: no local extremum
    d = np.diff(traj.z[sel])
    assert np.all(np.sign(d[1:]) == np.sign(d[:-1]))


def test_radius_convergence_logistic():
    # radial equation dr/dt = r (1 - r): r(t) = 1 / (1 + (1/r0 - 1) e^-t)
    for r0 in (0.5, 0.8, 1.5, 2.0):
        traj = integrate_trajectory(RRISeries.constant(1.0, 6), 256, ECG_PARAMS,
                                    state0=(-r0, 0.0, 0.0))
        expect = 1.0 / (1.0 + (1.0 / r0 - 1.0) * np.exp(-traj.t))
        np.testing.assert_allclose(traj.radius, expect, atol=1e-8)
        assert np.all(np.abs(traj.radius[traj.t >= 5.0] - 1.0) <= 0.01)


@pytest.mark.xfail(strict=True, reason="logistic radius needs ~4.6 s from r0 = 0.5")
def test_radius_within_two_seconds():
    traj = integrate_trajectory(RRISeries.constant(1.0, 3), 256, ECG_PARAMS,
                                state0=(-0.5, 0.0, 0.0))
    assert abs(traj.radius[traj.t >= 2.0][0] - 1.0) <= 0.01


def test_five_minute_beat_count():
    rng = np.random.default_rng(2)
    rri = np.clip(0.8 + 0.05 * np.cumsum(rng.normal(0, 0.2, 400)), 0.45, 1.3)
    onsets = np.r_[0.0, np.cumsum(rri)[:-1]]
    keep = onsets < 300
    series = RRISeries(rri[keep], onsets[keep])
    ecg = synthesize_ecg(series, 0.25, 256, duration=300)
    commanded = np.sum(onsets[keep] + 0.5 * rri[keep] < 300)
    assert abs(detect_r_peaks(ecg).size - commanded) <= 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_fuzzed_rri_finite_and_bp_in_range(seed):
    rng = np.random.default_rng(seed)
    rri = rng.uniform(0.3, 2.0, 40)
    onsets = np.r_[0.0, np.cumsum(rri)[:-1]]
    series = RRISeries(rri, onsets)
    ecg = synthesize_ecg(series, rng.uniform(0.1, 0.5, 100), 128)
    bp = synthesize_bp(series, 128)
    assert np.all(np.isfinite(ecg.samples)) and np.all(np.isfinite(bp.samples))
    n_win = int(np.ceil(bp.samples.size / (60 * 128)))
    for k in range(n_win):
        seg = bp.samples[k * 60 * 128:(k + 1) * 60 * 128]
        sel = (onsets >= 60 * k) & (onsets < 60 * (k + 1))
        lo, hi = bp_range(rri[sel].mean() if sel.any() else rri.mean())
        assert seg.min() >= lo - 1e-9 and seg.max() <= hi + 1e-9


def test_sample_count():
    ch = synthesize_ecg(RRISeries.constant(1.0, 10), 0.25, 300, duration=7.3)
    assert ch.samples.size == round(7.3 * 300)


def test_dz_golden_recomputed_with_mpmath():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 30
    dz = mp.mpf(0)
    for th, a, b in zip(ECG_PARAMS.theta, ECG_PARAMS.a, ECG_PARAMS.b):
        d = -mp.mpf(float(th))  # theta of (1, 0) is 0; every centre lies inside (-pi, pi]
        dz -= mp.mpf(float(a)) * d * mp.exp(-d * d / (2 * mp.mpf(float(b)) ** 2))
    assert float(dz) == pytest.approx(DZ_GOLDEN, rel=1e-15)
