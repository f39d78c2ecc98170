import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from physiosynth.cardio import RRISeries
from physiosynth.dsp import (FEATURES_6, FEATURES_13, Direction, WaveformChannel, bandpass,
                             beat_pressure_features, bp_beat_boundaries, detect_r_peaks,
                             detrend, detrend_bandpass, dft, direction_of_change,
                             dominant_frequency, idft, pearson, sdnn, sine_fit_frequency,
                             window_feature_vector)
from physiosynth.errors import (AllZeroError, BandError, NoBeatsError, TooFewBeatsError,
                                TooShortError)
from physiosynth.hemo import synthesize_bp, synthesize_ecg


def rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


def test_dft_round_trip(rng):
    x = rng.normal(size=37)
    assert np.max(np.abs(idft(dft(x)) - x)) <= 1e-9


def test_dft_constant_dc():
    X = dft(np.full(16, 3.0))
    assert X[0] == pytest.approx(48.0) and np.max(np.abs(X[1:])) < 1e-12


@settings(max_examples=30)
@given(st.integers(0, 2**31 - 1), st.integers(1, 200))
def test_parseval(seed, n):
    x = np.random.default_rng(seed).normal(size=n)
    X = dft(x)
    lhs = sum(v * v for v in x)
    rhs = sum(abs(v) ** 2 for v in X) / n
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, lhs)


def test_bandpass_examples():
    fs = 32.0
    t = np.arange(int(64 * fs)) / fs
    tone = np.sin(2 * np.pi * 0.25 * t + 0.4)
    assert rms(bandpass(tone, fs, 0.1, 0.9) - tone) < 1e-6
    # a linear detrend only leaves tones that are orthogonal to the ramp untouched
    even = np.cos(2 * np.pi * 0.25 * (t - t.mean()))
    assert rms(detrend_bandpass(even, fs, 0.1, 0.9) - even) < 1e-6
    assert rms(bandpass(np.sin(2 * np.pi * 3.0 * t + 0.4), fs, 0.1, 0.9)) < 1e-6
    assert rms(detrend_bandpass(np.cos(2 * np.pi * 3.0 * (t - t.mean())), fs, 0.1, 0.9)) < 1e-6
    assert rms(detrend(3.0 + 0.7 * t)) < 1e-9
    with pytest.raises(BandError):
        detrend_bandpass(tone, fs, 0.9, 0.1)
    with pytest.raises(BandError):
        bandpass(tone, fs, 0.1, 16.0)


def test_dominant_frequency_examples():
    fs = 32.0
    t = np.arange(int(40 * fs)) / fs
    assert dominant_frequency(np.sin(2 * np.pi * 0.25 * t), fs, 0.1, 0.9) == 0.25
    both = np.sin(2 * np.pi * 0.2 * t) + np.sin(2 * np.pi * 0.4 * t)
    assert dominant_frequency(both, fs, 0.1, 0.9) == pytest.approx(0.2)
    with pytest.raises(AllZeroError):
        dominant_frequency(np.zeros(t.size), fs, 0.1, 0.9)
    with pytest.raises(TooShortError):
        dominant_frequency(np.ones(32), fs, 0.1, 0.9)


def test_dominant_frequency_chirp_brute_force():
    fs = 16.0
    t = np.arange(int(30 * fs)) / fs
    x = np.sin(2 * np.pi * (0.15 * t + 0.01 * t ** 2))
    n = x.size
    k = np.arange(n)
    energy = {m: abs(np.sum(x * np.exp(-2j * np.pi * m * k / n))) for m in range(n // 2 + 1)}
    band = [m for m in energy if 0.1 <= m * fs / n <= 0.9]
    best = max(band, key=lambda m: (energy[m], -m))
    assert dominant_frequency(x, fs, 0.1, 0.9) == pytest.approx(best * fs / n)


def test_sine_fit_resolves_short_windows():
    fs = 32.0
    t = np.arange(int(6 * fs)) / fs
    for f in (0.13, 0.2, 0.37, 0.5):
        assert sine_fit_frequency(np.sin(2 * np.pi * f * t + 0.3), fs, 0.1, 0.9) == \
            pytest.approx(f, abs=1e-4)
    with pytest.raises(AllZeroError):
        sine_fit_frequency(np.ones(64), fs, 0.1, 0.9)


def test_r_peaks_examples():
    ecg = synthesize_ecg(RRISeries.constant(1.0, 60), 0.25, 256)
    peaks = detect_r_peaks(ecg)
    assert abs(peaks.size - 60) <= 1
    with pytest.raises(NoBeatsError):
        detect_r_peaks(WaveformChannel("ecg", 256, "mV", np.zeros(1000)))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.01, 100), st.floats(-50, 50))
def test_r_peaks_affine_invariant(scale, shift):
    ecg = synthesize_ecg(RRISeries.constant(0.8, 30), 0.25, 256)
    base = detect_r_peaks(ecg)
    moved = WaveformChannel("ecg", 256, "mV", scale * ecg.samples + shift)
    np.testing.assert_array_equal(detect_r_peaks(moved), base)


def test_beat_pressure_examples():
    rri = RRISeries.constant(1.0, 60)
    bp = synthesize_bp(rri, 256)
    beats = bp_beat_boundaries(detect_r_peaks(synthesize_ecg(rri, 0.25, 256)))
    f = beat_pressure_features(bp, beats)
    assert f.sbp.mean() == pytest.approx(120, abs=5) and f.dbp.mean() == pytest.approx(80, abs=5)
    assert np.all((f.lvet > 0) & (f.lvet < 1.0))
    with pytest.raises(TooFewBeatsError):
        beat_pressure_features(bp, [1.0])
    with pytest.raises(TooFewBeatsError):
        bp_beat_boundaries([1.0])


def test_beat_pressure_sinusoid_notch():
    # one cycle shaped 1 - cos with a dip in the falling half: the dip is the notch
    fs = 100.0
    t = np.arange(100) / fs
    x = np.sin(np.pi * t) + 0.2 * np.exp(-0.5 * ((t - 0.75) / 0.03) ** 2) * -1
    f = beat_pressure_features(WaveformChannel("bp", fs, "mmHg", x), [0.0, 0.99])
    assert not f.degraded[0]
    assert f.lvet[0] == pytest.approx(0.75, abs=0.02)
    mono = np.sin(np.pi * t)
    g = beat_pressure_features(WaveformChannel("bp", fs, "mmHg", mono), [0.0, 0.99])
    assert g.degraded[0] and g.lvet[0] == pytest.approx(0.37 * 0.99)


def test_sdnn_examples():
    assert sdnn(np.full(10, 0.8), np.arange(10) * 0.8)[0] == 0
    assert sdnn(np.array([0.9, 1.1]), np.array([0.0, 0.9]))[0] == pytest.approx(0.1)
    r = np.random.default_rng(0).uniform(0.7, 1.1, 100)
    on = np.r_[0.0, np.cumsum(r)[:-1]]
    np.testing.assert_allclose(sdnn(2 * r, 2 * on, window=120.0), 2 * sdnn(r, on, window=60.0))
    with pytest.raises(TooFewBeatsError):
        sdnn(np.array([1.0]), np.array([0.0]))


def test_window_features_constant_and_ramp():
    feats = window_feature_vector(np.full(64, 2.5), 8.0, 6.0, 0.5, 6)
    for f in feats:
        assert f["mean"] == 2.5 and all(f[k] == 0 for k in FEATURES_6 if k != "mean")
    ramp = np.arange(48.0)
    f = window_feature_vector(ramp, 8.0, 6.0, 0.5, 13)[0]
    assert len(f) == 13 and tuple(f) == FEATURES_13
    assert f["mean"] == pytest.approx(23.5) and f["mean_abs_diff1"] == 1
    assert f["mean_abs_diff2"] == 0 and f["std"] == pytest.approx(np.sqrt((48 ** 2 - 1) / 12))
    assert f["mean_abs_diff1_norm"] == pytest.approx(1 / f["std"])
    assert f["median"] == 23.5 and f["range"] == 47 and f["skewness"] == pytest.approx(0, abs=1e-12)
    assert f["kurtosis"] == pytest.approx(stats.kurtosis(ramp))
    with pytest.raises(TooShortError):
        window_feature_vector(np.ones(10), 8.0)


@given(st.integers(48, 2000))
def test_window_count(n):
    w = 48
    feats = window_feature_vector(np.random.default_rng(n).normal(size=n), 8.0, 6.0, 0.5)
    assert len(feats) == (n - w) // (w // 2) + 1
    assert all(np.isfinite(list(f.values())).all() for f in feats)


def test_direction_examples():
    assert direction_of_change([10, 1, -10]) == [Direction.UP, Direction.NONE, Direction.DOWN]
    assert direction_of_change([0.0, 0.0]) == [Direction.NONE] * 2
    assert direction_of_change({"a": 3.0}) == {"a": Direction.UP}


def test_pearson():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])
