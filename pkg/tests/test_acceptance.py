"""Acceptance criteria, one test each, at their stated tolerances.

Each test prints a single ``PASS``/``FAIL`` line with the measured values.
"""

import json
import time

import numpy as np
import pytest

from conftest import random_clip
from physiosynth import bvh, cli, dsp, neural, resp, scr, styletx
from physiosynth.cardio import RRISeries, karvonen_demand, met_intensity
from physiosynth.dsp import bp_beat_boundaries, beat_pressure_features, detect_r_peaks
from physiosynth.hemo import ECG_PARAMS, synthesize_bp, synthesize_ecg, wrap_angle
from physiosynth.neural import MLPConfig, TrainConfig
from physiosynth.pipeline import RunManifest, run_synthesis, self_consistency, write_bundle
from physiosynth.scenario import Scenario, ScenarioEvent, SubjectProfile, constant_scenario

EXTREMUM_SIGN = (1, -1, 1, -1, 1)  # P max, Q min, R max, S min, T max


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {title} ({detail})")
        assert ok, detail
    return emit


def test_c1_direction_reproduction(trained, tmp_path, report):
    out = tmp_path / "report.json"
    start = time.perf_counter()
    code = cli.main(["eval-directions", "--weights", str(trained.weights_dir),
                     "--report", str(out), "--seed", "0"])
    eval_s = time.perf_counter() - start
    rep = json.loads(out.read_text())
    total = trained.train_seconds + eval_s
    ok = code == 0 and rep["n_cells"] == 64 and rep["error_rate"] <= 0.125 and total < 300
    report(1, "direction reproduction",
           ok, f"{rep['n_mismatched']}/{rep['n_cells']} mismatched, error rate "
               f"{rep['error_rate']:.4f} <= 0.125, runtime {total:.1f} s < 300 s")


def test_c2_ecg_rate_fidelity(report):
    rri = RRISeries.constant(1.0, 300)
    ecg, traj = synthesize_ecg(rri, 0.25, 256, trajectory=True)
    peaks = detect_r_peaks(ecg)
    hr = 60.0 / np.diff(peaks).mean()
    beat = np.floor(traj.t + 0.5).astype(int)
    worst = 0.0
    for k in range(1, 299):
        sel = np.flatnonzero(beat == k)
        th, z = traj.theta[sel], traj.z[sel]
        for centre, sign in zip(ECG_PARAMS.theta, EXTREMUM_SIGN):
            near = np.abs(wrap_angle(th - centre)) < 0.15
            i = np.argmax(sign * z[near])
            worst = max(worst, abs(float(wrap_angle(th[near][i] - centre))))
    ok = abs(hr - 60.0) <= 0.02 * 60.0 and worst <= 0.08
    report(2, "ECG rate fidelity", ok,
           f"mean HR {hr:.3f} bpm within 60 +/- 1.2, worst PQRST angle error {worst:.4f} rad <= 0.08")


def test_c3_bp_scaling(report):
    rri = RRISeries.constant(1.0, 60)
    bp = synthesize_bp(rri, 256)
    f = beat_pressure_features(bp, bp_beat_boundaries(detect_r_peaks(synthesize_ecg(rri, 0.25, 256))))
    sbp, dbp = f.sbp.mean(), f.dbp.mean()
    ok = abs(sbp - 120) <= 5 and abs(dbp - 80) <= 5
    report(3, "BP scaling", ok, f"SBP {sbp:.2f} in 120 +/- 5, DBP {dbp:.2f} in 80 +/- 5")


def test_c4_respiration_chain(report):
    worst = 0.0
    for rr in (8, 12, 20, 30):
        for seed in range(3):
            est = resp.extract_rr(resp.synthesize_resp(np.full(120, float(rr)), 32, seed=seed))
            worst = max(worst, float(np.max(np.abs(est - rr))))
    p = SubjectProfile()
    grid = resp.rr_from_hr(karvonen_demand(p, met_intensity(p, np.arange(1, 11))), p)
    monotone = bool(np.all(np.diff(grid) >= 0))
    floor = resp.optimal_rr(0.0) == resp.RR_FLOOR
    ok = worst <= 0.5 and monotone and floor
    report(4, "respiration chain", ok,
           f"worst round-trip error {worst:.3f} <= 0.5 br/min, MET 1..10 nondecreasing {monotone} "
           f"({grid[0]:.2f} -> {grid[-1]:.2f}), optimal_rr(0) at floor {floor}")


def test_c5_scr_correctness(report):
    rng = np.random.default_rng(2024)
    h = scr.response_function(60, 16)
    worst_rel, lowest = 0.0, np.inf
    for _ in range(100):
        n = int(rng.integers(0, scr.MAX_BURSTS + 1))
        b = scr.BurstSet(rng.uniform(0, 60, n), rng.uniform(0, scr.A_MAX, n))
        u = scr.sudomotor_drive(b, 60, 16)
        fast = scr.fft_convolve(u, h, u.size, 1 / 16)
        slow = scr.direct_convolve(u, h, u.size, 1 / 16)
        scale = np.max(np.abs(slow))
        worst_rel = max(worst_rel, float(np.max(np.abs(fast - slow)) / scale) if scale else 0.0)
        lowest = min(lowest, float(np.min(scr.synthesize_scr(b).samples) - scr.BASELINE))
    cap_ok = True
    for seed in range(50):
        w = neural.init_weights(scr.scr_config(seed))
        w.w2 *= 50.0
        w.meta["trained"] = True
        ctx = (rng.uniform(1, 9), rng.uniform(1, 9), rng.uniform(0.9, 20),
               int(rng.integers(1, 100)), rng.choice(["male", "female"]), rng.uniform(0, 1e6))
        b = scr.theta_from_context(w, *ctx)
        cap_ok &= len(b) <= scr.MAX_BURSTS and bool(np.all(b.amps <= scr.A_MAX))
    ok = worst_rel <= 1e-9 and lowest >= 0 and cap_ok
    report(5, "SCR correctness", ok,
           f"FFT vs direct worst relative error {worst_rel:.2e} <= 1e-9 on 100 sets, "
           f"min SCR - baseline {lowest:.3g} >= 0, burst cap held {cap_ok}")


def test_c6_style_transfer(tmp_path, report):
    rng = np.random.default_rng(6)
    clip = random_clip(rng, n_frames=77)
    same = styletx.transfer_style(clip, clip, clip)
    other = random_clip(rng, n_frames=77)
    identity_err = float(np.max(np.abs(same.frames - clip.frames)))
    identity_err = max(identity_err, float(np.max(np.abs(
        styletx.transfer_style(clip, other, other).frames - clip.frames))))
    worst_imag, worst_phase = 0.0, 0.0
    for _ in range(20):
        t, s, r = (rng.normal(size=rng.integers(8, 200)) for _ in range(3))
        spec = styletx.stylized_spectrum(t, s, r)
        z = dsp.idft(spec.magnitude * np.exp(1j * spec.phase))
        worst_imag = max(worst_imag, float(np.max(np.abs(z.imag)) / np.max(np.abs(z.real))))
        # phase of the real output, re-transformed, against the target's own phase
        tgt = styletx.channel_spectrum(np.pad(t, (0, spec.length - t.size)))
        out = styletx.channel_spectrum(z.real)
        live = (out.magnitude > 1e-6 * out.magnitude.max()) & \
            (tgt.magnitude > 1e-6 * tgt.magnitude.max())
        d = np.angle(np.exp(1j * (out.phase[live] - tgt.phase[live])))
        worst_phase = max(worst_phase, float(np.max(np.abs(d))))
    styled = styletx.transfer_style(clip, random_clip(rng, n_frames=40), random_clip(rng, 90))
    bvh.save_bvh(styled, tmp_path / "styled.bvh")
    back = bvh.read_bvh(tmp_path / "styled.bvh")
    rt = float(np.max(np.abs(back.frames - styled.frames)))
    ok = (identity_err <= 1e-9 and worst_imag <= 1e-9 and worst_phase <= 1e-6
          and back.skeleton.layout() == clip.skeleton.layout() and rt <= 1e-6)
    report(6, "style transfer", ok,
           f"identity error {identity_err:.2e} <= 1e-9, imaginary residue {worst_imag:.2e}, "
           f"phase drift {worst_phase:.2e} rad, BVH round-trip error {rt:.2e}")


def test_c7_mlp(report):
    rng = np.random.default_rng(7)
    worst = 0.0
    for seed in range(100):
        cfg = MLPConfig(int(rng.integers(1, 7)), int(rng.integers(1, 13)), int(rng.integers(1, 4)),
                        str(rng.choice(["sigmoid", "linear"])), seed=seed)
        w = neural.init_weights(cfg)
        worst = max(worst, neural.gradient_check(w, rng.normal(size=cfg.input_dim),
                                                 rng.uniform(size=cfg.output_dim)))
    x = rng.uniform(size=(50, 3))
    y = rng.uniform(size=(50, 2))
    tc = TrainConfig(learning_rate=1e-2, minibatch_size=8, epochs=30, dropout_rate=0.2, seed=11)
    a = neural.train_adam(MLPConfig(3, 6, 2, seed=4), tc, x, y)
    b = neural.train_adam(MLPConfig(3, 6, 2, seed=4), tc, x, y)
    same = all(p.tobytes() == q.tobytes() for p, q in zip(a.params(), b.params()))
    ok = worst <= 1e-5 and same
    report(7, "MLP", ok, f"worst gradient-check error {worst:.2e} <= 1e-5 over 100 nets, "
                         f"bitwise reproducible {same}")


def varying_scenario():
    return Scenario([ScenarioEvent(0.0, 100.0, met=1.0, valence=5, arousal=5),
                     ScenarioEvent(100.0, 100.0, met=4.0, valence=2, arousal=7.5),
                     ScenarioEvent(200.0, 100.0, met=1.5, valence=2.5, arousal=3)], 300.0)


def test_c8_self_consistency(trained, tmp_path, capsys, report):
    b = run_synthesis(RunManifest(SubjectProfile(), varying_scenario()), trained.weights)
    r = self_consistency(b)
    write_bundle(b, tmp_path)
    capsys.readouterr()
    cli_r = {}
    for ref, meas, sig in (("hr.csv", "ecg.csv", "ecg"), ("rr.csv", "resp.csv", "resp")):
        code = cli.main(["correlate", "--reference", str(tmp_path / ref),
                         "--measured", str(tmp_path / meas), "--signal", sig])
        cli_r[sig] = float(capsys.readouterr().out.split()[-1]) if code == 0 else np.nan
    ok = r["hr"] >= 0.9 and r["rr"] >= 0.9 and cli_r["ecg"] >= 0.9 and cli_r["resp"] >= 0.9
    report(8, "self-consistency", ok,
           f"HR r {r['hr']:.4f}, RR r {r['rr']:.4f} >= 0.9; CSV correlate HR r "
           f"{cli_r['ecg']:.4f}, RR r {cli_r['resp']:.4f}")


def test_c9_determinism_and_speed(trained, tmp_path, report):
    m = RunManifest(SubjectProfile(), varying_scenario(), seed=9)
    for k in ("a", "b"):
        write_bundle(run_synthesis(m, trained.weights), tmp_path / k)
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    identical = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
                    for f in files)
    hour = RunManifest(SubjectProfile(), constant_scenario(3600.0, 1.3), seed=1)
    start = time.perf_counter()
    b = run_synthesis(hour, trained.weights)
    secs = time.perf_counter() - start
    full = all(b.channels[c].duration == pytest.approx(3600.0) for c in ("ecg", "bp", "resp", "scr"))
    ok = identical and full and secs < 10.0
    report(9, "determinism and speed", ok,
           f"{len(files)} bundle files byte-identical {identical}, 1 h of four channels "
           f"in {secs:.2f} s < 10 s")
