"""End-to-end orchestration: synthesis runs, output bundles, synthetic
training sets, model training and the emotion direction evaluation.

Per control tick the order is: drive sample, HR kinetics (emotion offset
added to the demand), RR intervals (emotion SDNN offset), ECG and BP,
the VO2 chain to breathing rate (emotion offset), respiration, then the
per-window skin-conductance bursts and SCR.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from . import __version__, bvh, cardio, dsp, hemo, neural, resp, scr
from .dsp import Direction, WaveformChannel
from .errors import (MissingWeightsError, SkeletonMismatchError, TooFewBeatsError,
                     ValidationError)
from .neural import MLPConfig, MLPWeights, TrainConfig
from .scenario import (Scenario, SubjectProfile, constant_scenario, drive_series,
                       resolve_actions, scenario_to_json, validate_scenario)

SAMPLE_RATES = {"ecg": 256.0, "bp": 256.0, "resp": 32.0, "scr": 16.0, "skeleton": 120.0}
SEATED_MET = 1.3
FEATURES = ("HR", "HRV", "SBP", "DBP", "LVET", "RR", "SCR")
TASKS = ("hr", "rr", "scr")
BVH_SCALE = 0.01  # file units (cm) to metres


# --- manifests and weights --------------------------------------------------

@dataclass
class WeightSet:
    hr: Optional[MLPWeights] = None
    rr: Optional[MLPWeights] = None
    scr: Optional[MLPWeights] = None
    digests: dict = field(default_factory=dict)

    @property
    def enabled(self) -> bool:
        return any(w is not None for w in (self.hr, self.rr, self.scr))


def _digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def load_weight_set(directory) -> WeightSet:
    """Load ``hr.json``, ``rr.json`` and ``scr.json`` from a directory."""
    directory = Path(directory)
    missing = [t for t in TASKS if not (directory / f"{t}.json").is_file()]
    if missing:
        raise MissingWeightsError(f"missing weight files in {directory}: {missing}")
    ws = WeightSet()
    for t in TASKS:
        raw = (directory / f"{t}.json").read_bytes()
        setattr(ws, t, MLPWeights.from_json(json.loads(raw)))
        ws.digests[t] = _digest_bytes(raw)
    return ws


def weight_set_from_models(hr=None, rr=None, scr_=None) -> WeightSet:
    ws = WeightSet(hr, rr, scr_)
    for name, w in (("hr", hr), ("rr", rr), ("scr", scr_)):
        if w is not None:
            ws.digests[name] = _digest_bytes(json.dumps(w.to_json(), sort_keys=True).encode())
    return ws


@dataclass
class RunManifest:
    profile: SubjectProfile
    scenario: Scenario
    seed: int = 0
    sample_rates: dict = field(default_factory=lambda: dict(SAMPLE_RATES))
    version: str = __version__
    weight_digests: dict = field(default_factory=dict)
    base_dir: Optional[str] = None  # resolves relative BVH paths

    def to_dict(self) -> dict:
        return {
            "profile": self.profile.to_dict(),
            "scenario": scenario_to_json(self.scenario),
            "seed": int(self.seed),
            "sample_rates": {k: float(v) for k, v in self.sample_rates.items()},
            "version": self.version,
            "weight_digests": dict(sorted(self.weight_digests.items())),
        }


@dataclass
class Bundle:
    manifest: RunManifest
    channels: dict                   # name -> WaveformChannel
    rri: cardio.RRISeries
    hr: np.ndarray                   # control-rate HR, starts at t = 0
    rr: np.ndarray                   # commanded breathing rate, 1 Hz
    bursts: list
    motion: Optional[bvh.MotionClip] = None


# --- motion -----------------------------------------------------------------

def _resolve_path(path: str, base_dir: Optional[str]) -> Path:
    p = Path(path)
    return p if p.is_absolute() or base_dir is None else Path(base_dir) / p


def _motion_for_events(scenario: Scenario, base_dir: Optional[str]):
    clips = {}
    for k, ev in enumerate(scenario.events):
        if ev.bvh is not None:
            clips[k] = bvh.read_bvh(_resolve_path(ev.bvh, base_dir))
    return clips


def _clip_velocity(clip: bvh.MotionClip, duration: float) -> np.ndarray:
    """Mean joint speed (m/s) per second of the clip looped over ``duration``."""
    looped = bvh.loop_to_duration(clip, max(duration, 2.0 * clip.frame_time + 1.0))
    return bvh.mean_joint_speed(looped, 1.0, BVH_SCALE)


def _attach_motion_mets(scenario: Scenario, clips: dict) -> Scenario:
    events = list(scenario.events)
    for k, clip in clips.items():
        ev = events[k]
        if ev.met is None and ev.action is None:
            v = float(np.mean(_clip_velocity(clip, ev.duration)))
            events[k] = replace(ev, met=bvh.met_for_action(v))
    return Scenario(events, scenario.total_duration)


def build_motion(scenario: Scenario, clips: dict, fps: float = SAMPLE_RATES["skeleton"]):
    """One clip at ``fps`` spanning the scenario; gaps hold the previous pose."""
    if not clips:
        return None
    first = clips[min(clips)]
    layout = first.skeleton.layout()
    for c in clips.values():
        if c.skeleton.layout() != layout:
            raise SkeletonMismatchError("scenario clips use different skeletons")
    n = int(round(scenario.total_duration * fps))
    frames = np.empty((n, first.skeleton.channel_count))
    t = np.arange(n) / fps
    owner = np.full(n, -1)
    for k, ev in enumerate(scenario.events):
        if k in clips:
            owner[(t >= ev.t_start) & (t < ev.t_end)] = k
    last = first.frames[0]
    for i in range(n):
        k = owner[i]
        if k >= 0:
            c = clips[k]
            rel = t[i] - scenario.events[k].t_start
            last = c.frames[int(rel / c.frame_time) % c.frame_count]
        frames[i] = last
    return bvh.MotionClip(first.skeleton, 1.0 / fps, frames)


# --- synthesis --------------------------------------------------------------

def _per_second(x_ctrl: np.ndarray, rate: float, n_sec: int) -> np.ndarray:
    idx = np.minimum(np.arange(n_sec + 1) * int(rate), x_ctrl.size - 1)
    return x_ctrl[idx]


def run_synthesis(manifest: RunManifest, weights: Optional[WeightSet] = None,
                  met_table: Optional[Mapping[str, float]] = None) -> Bundle:
    """Synthesize every channel for a scenario.

    Without weights the emotion offsets are zero and skin-conductance
    bursts come from the seeded default generator.
    """
    weights = weights or WeightSet()
    profile = manifest.profile
    sc = manifest.scenario
    clips = _motion_for_events(sc, manifest.base_dir)
    sc = _attach_motion_mets(sc, clips)
    sc = validate_scenario(resolve_actions(sc, met_table if met_table is not None
                                           else bvh.load_met_table()))
    rates = manifest.sample_rates
    T = sc.total_duration
    if not T > 0:
        raise ValidationError("scenario has zero duration")
    seed = int(manifest.seed)
    manifest = replace(manifest, scenario=sc, weight_digests=dict(weights.digests))

    # drive on the control grid
    rate = cardio.CONTROL_RATE
    n_ctrl = int(np.ceil(T * rate))
    t_ctrl = np.arange(n_ctrl) / rate
    drive = drive_series(sc, t_ctrl)
    velocity = drive["velocity"].copy()
    for k, clip in clips.items():
        ev = sc.events[k]
        inside = (t_ctrl >= ev.t_start) & (t_ctrl < ev.t_end)
        speeds = _clip_velocity(clip, ev.duration)
        sec = np.minimum(((t_ctrl[inside] - ev.t_start)).astype(int), speeds.size - 1)
        velocity[inside] = speeds[sec]

    # heart rate
    demand = cardio.karvonen_demand(profile, cardio.met_intensity(profile, drive["met"]))
    delta_hrv_ctrl = np.zeros(n_ctrl)
    if weights.hr is not None:
        d = cardio.emotion_hr_delta(weights.hr, drive["valence"], drive["arousal"])
        demand = demand + d.delta_hr
        delta_hrv_ctrl = np.asarray(d.delta_hrv, dtype=float)
    hr_ctrl = cardio.simulate_hr(demand, velocity, profile)

    # breathing rate (needed for the HRV respiratory band and ECG wander)
    n_sec = int(np.ceil(T))
    hr_sec = _per_second(hr_ctrl, rate, n_sec)
    rr_sec = np.asarray(resp.rr_from_hr(hr_sec, profile), dtype=float)
    if weights.rr is not None:
        sec_t = np.minimum(np.arange(n_sec + 1, dtype=float), T)
        dsec = drive_series(sc, sec_t)
        rr_sec = rr_sec + resp.emotion_rr_delta(weights.rr, dsec["valence"], dsec["arousal"])
    rr_sec = np.clip(rr_sec, resp.RR_FLOOR, resp.RR_CEIL)

    # RR intervals, ECG, BP
    dhrv_sec = _per_second(delta_hrv_ctrl, rate, n_sec)
    rri = cardio.build_rri_series(hr_sec, dhrv_sec, profile, seed=seed, resp_hz=float(rr_sec.mean()) / 60.0,
                                  duration=T)
    ecg = hemo.synthesize_ecg(rri, rr_sec / 60.0, rates["ecg"], duration=T)
    bp = hemo.synthesize_bp(rri, rates["bp"], duration=T)

    # respiration
    resp_ch = resp.synthesize_resp(rr_sec[:n_sec], rates["resp"], seed=seed + 1)
    resp_ch.samples = resp_ch.samples[:int(round(T * rates["resp"]))]

    # skin conductance, one burst set per 60-s window
    n_win = int(np.ceil(T / scr.WINDOW))
    bursts = []
    for k in range(n_win):
        t0 = k * scr.WINDOW
        ds = drive_series(sc, [t0])
        if weights.scr is not None:
            b = scr.theta_from_context(weights.scr, ds["valence"][0], ds["arousal"][0],
                                       ds["met"][0], profile.age, profile.gender, t0)
        else:
            b = scr.default_bursts(k, seed + 2, float(ds["met"][0]))
        bursts.append(b)
    scr_ch = scr.synthesize_scr_run(bursts, T, rates["scr"])

    channels = {"ecg": ecg, "bp": bp, "resp": resp_ch, "scr": scr_ch}
    motion = build_motion(sc, clips, rates["skeleton"])
    return Bundle(manifest, channels, rri, hr_ctrl[:n_ctrl], rr_sec[:n_sec], bursts, motion)


# --- bundle I/O -------------------------------------------------------------

def _series_csv(times, values, header=("t", "value")) -> str:
    lines = [",".join(header)]
    lines.extend(f"{t:.8f},{v:.6f}" for t, v in zip(np.asarray(times).tolist(),
                                                    np.asarray(values).tolist()))
    return "\n".join(lines) + "\n"


def write_bundle(bundle: Bundle, out_dir) -> dict:
    """Write one CSV per channel plus ``metadata.json``; returns the metadata."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, ch in bundle.channels.items():
        fname = f"{name}.csv"
        (out / fname).write_text(_series_csv(ch.times, ch.samples), encoding="utf-8")
        files[name] = {"file": fname, "unit": ch.unit, "sample_rate": ch.sample_rate,
                       "samples": int(ch.samples.size)}
    rate = cardio.CONTROL_RATE
    (out / "hr.csv").write_text(_series_csv(np.arange(bundle.hr.size) / rate, bundle.hr),
                                encoding="utf-8")
    files["hr"] = {"file": "hr.csv", "unit": "bpm", "sample_rate": rate,
                   "samples": int(bundle.hr.size)}
    (out / "rr.csv").write_text(_series_csv(np.arange(bundle.rr.size), bundle.rr),
                                encoding="utf-8")
    files["rr"] = {"file": "rr.csv", "unit": "breaths/min", "sample_rate": 1.0,
                   "samples": int(bundle.rr.size)}
    (out / "rri.csv").write_text(_series_csv(bundle.rri.t_onset, bundle.rri.rri,
                                             ("t_onset", "rri")), encoding="utf-8")
    files["rri"] = {"file": "rri.csv", "unit": "s", "beats": len(bundle.rri)}
    if bundle.motion is not None:
        bvh.save_bvh(bundle.motion, out / "motion.bvh")
        files["skeleton"] = {"file": "motion.bvh", "frames": bundle.motion.frame_count}
    meta = {"manifest": bundle.manifest.to_dict(), "channels": files}
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    return meta


def read_series_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column CSV with a header row -> (t, value)."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] < 2:
        raise ValidationError(f"{path}: expected two columns")
    return data[:, 0], data[:, 1]


def channel_from_csv(path, name: str = "signal", unit: str = "") -> WaveformChannel:
    t, v = read_series_csv(path)
    if t.size < 2:
        raise ValidationError(f"{path}: need at least two samples")
    dt = np.diff(t)
    if np.any(dt <= 0) or np.ptp(dt) > 1e-6 * max(dt.mean(), 1e-12) + 1e-7:
        raise ValidationError(f"{path}: samples are not uniformly spaced")
    return WaveformChannel(name, float(np.round(1.0 / dt.mean(), 6)), unit, v)


# --- direction table ----------------------------------------------------------

_ARROWS = {"↑": {Direction.UP}, "↓": {Direction.DOWN}, "-": {Direction.NONE},
           "↑↓": {Direction.UP, Direction.DOWN}, "↑-": {Direction.UP, Direction.NONE},
           "...": {Direction.UP, Direction.DOWN, Direction.NONE}}


@dataclass(frozen=True)
class Cell:
    emotion: str
    feature: str
    notation: str
    accepted: frozenset
    tentative: bool

    @property
    def core(self) -> str:
        return self.notation.strip("()")


@dataclass
class DirectionTable:
    features: tuple
    emotions: tuple
    cells: dict  # (emotion, feature) -> Cell

    def cell(self, emotion: str, feature: str) -> Optional[Cell]:
        return self.cells.get((emotion, feature))

    def __len__(self):
        return len(self.cells)


def parse_cell(emotion: str, feature: str, notation: str) -> Cell:
    s = notation.strip()
    tentative = s.startswith("(") and s.endswith(")")
    core = s[1:-1] if tentative else s
    if core not in _ARROWS:
        raise ValidationError(f"unknown direction notation {notation!r} for {emotion}/{feature}")
    return Cell(emotion, feature, s, frozenset(_ARROWS[core]), tentative)


def direction_table_from_json(obj: dict) -> DirectionTable:
    features = tuple(obj["features"])
    bad = set(features) - set(FEATURES)
    if bad or not features:
        raise ValidationError(f"features must be drawn from {FEATURES}")
    emotions = tuple(obj["emotions"])
    if not emotions:
        raise ValidationError("direction table lists no emotions")
    cells = {}
    for emo, row in obj.get("cells", {}).items():
        if emo not in emotions:
            raise ValidationError(f"cells given for unlisted emotion {emo!r}")
        for feat, notation in row.items():
            if feat not in features:
                raise ValidationError(f"unknown feature {feat!r}")
            if notation is None or str(notation).strip() == "":
                continue
            cells[(emo, feat)] = parse_cell(emo, feat, str(notation))
    return DirectionTable(features, emotions, cells)


def _data_text(name: str) -> str:
    return resources.files("physiosynth.data").joinpath(name).read_text("utf-8")


def load_direction_table(path=None) -> DirectionTable:
    if path is None:
        return direction_table_from_json(json.loads(_data_text("direction_table.json")))
    with open(path, encoding="utf-8") as fh:
        return direction_table_from_json(json.load(fh))


def load_emotion_coords(path=None) -> dict:
    raw = json.loads(_data_text("emotion_coords.json")) if path is None else \
        json.load(open(path, encoding="utf-8"))
    coords = {}
    for k, v in raw.items():
        if k.startswith("_"):
            continue
        va = (float(v["valence"]), float(v["arousal"]))
        if not all(1.0 <= c <= 9.0 for c in va):
            raise ValidationError(f"coordinates of {k!r} outside [1, 9]")
        coords[k] = va
    if "neutral" not in coords:
        raise ValidationError("emotion coordinates need a 'neutral' entry")
    return coords


# --- synthetic training sets --------------------------------------------------

# magnitude ranges of the emotion offsets: (low, high)
DEFAULT_MAGNITUDES = {
    "hr": (4.0, 10.0),      # bpm
    "hrv": (0.010, 0.020),  # s of SDNN
    "rr": (2.0, 5.0),       # breaths/min
    "scr": (0.3, 0.6),      # relative change of burst amplitude
}
SCR_BASE_AMP = 0.6          # µS, neutral burst amplitude in the synthetic targets
JITTER = 0.25               # valence/arousal jitter around each emotion


def _cell_sign(cell: Optional[Cell], rng: np.random.Generator) -> float:
    """+1/-1/0 for a table cell; "both" cells take one seeded random sign."""
    if cell is None:
        return 0.0
    acc = cell.accepted
    if acc == {Direction.UP, Direction.DOWN}:
        return float(rng.choice([-1.0, 1.0]))
    if Direction.UP in acc and Direction.DOWN not in acc:
        return 1.0
    if acc == {Direction.DOWN}:
        return -1.0
    return 0.0


def emotion_signs(table: DirectionTable, seed: int) -> dict:
    """Sign of each generated offset (HR, HRV, RR, SCR) per emotion."""
    rng = np.random.default_rng([seed, 7])
    out = {}
    for emo in table.emotions:
        out[emo] = {f: _cell_sign(table.cell(emo, f), rng) for f in ("HR", "HRV", "RR", "SCR")}
    return out


def _fmt_row(values) -> str:
    return ",".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in values)


def make_training_set(table: DirectionTable, coords: Mapping[str, tuple], out_dir=None,
                      count: int = 100, seed: int = 0,
                      magnitudes: Optional[Mapping[str, tuple]] = None,
                      scr_count: Optional[int] = None,
                      profile: SubjectProfile = SubjectProfile()) -> dict:
    """Synthetic (valence, arousal) -> offset datasets following the table.

    Returns CSV texts for ``hr.csv``, ``rr.csv`` and ``scr.csv`` (and
    writes them when ``out_dir`` is given). Neutral rows carry zero
    offsets. Skin-conductance targets are 60-s windows synthesized from
    random bursts whose amplitude is scaled by the emotion's sign.
    """
    mags = dict(DEFAULT_MAGNITUDES)
    mags.update(magnitudes or {})
    missing = [e for e in table.emotions if e not in coords]
    if missing:
        raise ValidationError(f"no coordinates for emotions {missing}")
    signs = emotion_signs(table, seed)
    signs["neutral"] = {f: 0.0 for f in ("HR", "HRV", "RR", "SCR")}
    rng = np.random.default_rng(seed)
    scr_count = max(count // 2, 1) if scr_count is None else scr_count
    emotions = ("neutral",) + tuple(e for e in table.emotions if e != "neutral")

    hr_lines = ["valence,arousal,delta_hr,delta_hrv"]
    rr_lines = ["valence,arousal,delta_rr"]
    n_t = int(scr.WINDOW * scr.SAMPLE_RATE)
    scr_lines = [",".join(scr.CONTEXT_COLUMNS + tuple(f"s{k}" for k in range(n_t)))]
    h = scr.response_function()
    gender = 1 if profile.gender == "female" else 0
    for emo in emotions:
        v0, a0 = coords[emo]
        sg = signs[emo]
        for _ in range(count):
            v = float(np.clip(v0 + rng.uniform(-JITTER, JITTER), 1, 9))
            a = float(np.clip(a0 + rng.uniform(-JITTER, JITTER), 1, 9))
            dh = sg["HR"] * rng.uniform(*mags["hr"])
            dv = sg["HRV"] * rng.uniform(*mags["hrv"])
            dr = sg["RR"] * rng.uniform(*mags["rr"])
            hr_lines.append(_fmt_row([v, a, float(dh), float(dv)]))
            rr_lines.append(_fmt_row([v, a, float(dr)]))
        for _ in range(scr_count):
            v = float(np.clip(v0 + rng.uniform(-JITTER, JITTER), 1, 9))
            a = float(np.clip(a0 + rng.uniform(-JITTER, JITTER), 1, 9))
            start = float(rng.integers(0, 1440) * 60)
            gain = 1.0 + sg["SCR"] * rng.uniform(*mags["scr"])
            amps = np.clip(SCR_BASE_AMP * gain * rng.uniform(0.5, 1.5, scr.N_BURSTS),
                           0.0, scr.A_MAX)
            b = scr.BurstSet(rng.uniform(0.0, scr.WINDOW, scr.N_BURSTS), amps)
            u = scr.sudomotor_drive(b, scr.WINDOW)
            y = scr.BASELINE + scr.fft_convolve(u, h, n_t, 1.0 / scr.SAMPLE_RATE)
            row = [v, a, SEATED_MET, float(profile.age), gender, start] + y.tolist()
            scr_lines.append(_fmt_row(row))
    texts = {"hr.csv": "\n".join(hr_lines) + "\n",
             "rr.csv": "\n".join(rr_lines) + "\n",
             "scr.csv": "\n".join(scr_lines) + "\n"}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, text in texts.items():
            (out / name).write_text(text, encoding="utf-8")
    return texts


# --- training -----------------------------------------------------------------

HIDDEN = {"hr": 10, "rr": 6}
TARGETS = {"hr": ("delta_hr", "delta_hrv"), "rr": ("delta_rr",)}
EPOCHS = {"hr": 2000, "rr": 2000, "scr": 1500}
LEARNING_RATE = {"hr": 1e-2, "rr": 1e-2}
MINIBATCH = 64
L2 = 1e-5
OUTPUT_MARGIN = 1.25


def read_table_csv(path_or_text) -> tuple[list, np.ndarray]:
    """Header + float matrix from a CSV file path or CSV text."""
    is_text = isinstance(path_or_text, str) and ("\n" in path_or_text or not path_or_text)
    if not is_text and Path(path_or_text).is_file():
        text = Path(path_or_text).read_text(encoding="utf-8")
    elif not is_text:
        raise ValidationError(f"no such CSV file: {path_or_text}")
    else:
        text = path_or_text
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("CSV is empty") from None
    rows = [r for r in reader if r]
    if not rows:
        raise ValidationError("CSV has a header but no rows")
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ValidationError(f"non-numeric CSV value: {exc}") from None
    if data.shape[1] != len(header):
        raise ValidationError("CSV rows do not match the header width")
    return header, data


def _columns(header, data, names):
    try:
        return data[:, [header.index(n) for n in names]]
    except ValueError:
        raise ValidationError(f"CSV needs columns {list(names)}") from None


def train_task(task: str, data, seed: int = 0, epochs: Optional[int] = None) -> MLPWeights:
    """Train the emotion model for ``task`` ('hr', 'rr' or 'scr') on a CSV."""
    if task not in TASKS:
        raise ValidationError(f"task must be one of {TASKS}")
    header, mat = read_table_csv(data)
    if task == "scr":
        ctx = _columns(header, mat, scr.CONTEXT_COLUMNS)
        x = scr.context_vector(*ctx.T)
        targets = mat[:, len(scr.CONTEXT_COLUMNS):]
        if targets.shape[1] != int(scr.WINDOW * scr.SAMPLE_RATE):
            raise ValidationError("SCR rows need 60 s of 16-Hz target samples")
        return scr.train_scr(x, targets, seed=seed, epochs=epochs or EPOCHS["scr"])
    x = (_columns(header, mat, ("valence", "arousal")) - 1.0) / 8.0
    y = _columns(header, mat, TARGETS[task])
    scale = np.maximum(np.abs(y).max(axis=0) * OUTPUT_MARGIN, 1e-9)
    cfg = MLPConfig(2, HIDDEN[task], y.shape[1], "sigmoid", seed=seed)
    tcfg = TrainConfig(learning_rate=LEARNING_RATE[task], minibatch_size=MINIBATCH,
                       epochs=epochs or EPOCHS[task], l2_penalty=L2, dropout_rate=0.0,
                       seed=seed)
    w = neural.train_adam(cfg, tcfg, x, neural.encode_symmetric(y, scale))
    w.meta.update({"trained": True, "task": task, "output_scale": scale.tolist(),
                   "outputs": list(TARGETS[task])})
    return w


# --- evaluation -----------------------------------------------------------------

EVAL_DURATION = 300.0
EVAL_WINDOW = 120.0


def extract_features(bundle: Bundle, window: float = EVAL_WINDOW) -> dict:
    """HR, HRV (SDNN), SBP, DBP, LVET, RR and SCR over the final ``window`` s."""
    ecg = bundle.channels["ecg"]
    T = ecg.duration
    t0 = T - window
    peaks = dsp.detect_r_peaks(ecg)
    sel = peaks[peaks >= t0]
    if sel.size < 3:
        raise TooFewBeatsError("too few beats in the evaluation window")
    rri = np.diff(sel)
    bounds = dsp.bp_beat_boundaries(sel)
    bpf = dsp.beat_pressure_features(bundle.channels["bp"], bounds)
    rc = bundle.channels["resp"]
    i0 = int(round(t0 * rc.sample_rate))
    rr = resp.extract_rr(WaveformChannel("resp", rc.sample_rate, rc.unit, rc.samples[i0:]))
    sc = bundle.channels["scr"]
    return {
        "HR": float(60.0 / rri.mean()),
        "HRV": float(rri.std()),
        "SBP": float(bpf.sbp.mean()),
        "DBP": float(bpf.dbp.mean()),
        "LVET": float(bpf.lvet.mean()),
        "RR": float(rr.mean()),
        "SCR": float(sc.samples[int(round(t0 * sc.sample_rate)):].mean()),
    }


def emotion_features(weights: WeightSet, coords: Mapping[str, tuple], emotions,
                     profile: SubjectProfile = SubjectProfile(), seed: int = 0,
                     duration: float = EVAL_DURATION) -> dict:
    """Seated runs for each emotion (plus neutral), all with the same seed."""
    out = {}
    for emo in ("neutral",) + tuple(e for e in emotions if e != "neutral"):
        v, a = coords[emo]
        m = RunManifest(profile, constant_scenario(duration, SEATED_MET, v, a), seed=seed)
        out[emo] = extract_features(run_synthesis(m, weights))
    return out


def eval_directions(weights: WeightSet, table: DirectionTable, coords: Mapping[str, tuple],
                    profile: SubjectProfile = SubjectProfile(), seed: int = 0) -> dict:
    """Match report of observed feature directions against the table."""
    if not weights.enabled:
        raise MissingWeightsError("direction evaluation needs trained weights")
    missing = [e for e in table.emotions if e not in coords]
    if missing:
        raise ValidationError(f"no coordinates for emotions {missing}")
    feats = emotion_features(weights, coords, table.emotions, profile, seed)
    emos = [e for e in table.emotions if e != "neutral"]
    deltas = {f: {e: feats[e][f] - feats["neutral"][f] for e in emos} for f in table.features}
    observed = {f: dsp.direction_of_change(deltas[f]) for f in table.features}
    cells = []
    for emo in table.emotions:
        for f in table.features:
            c = table.cell(emo, f)
            if c is None:
                continue
            obs = observed[f][emo]
            cells.append({"emotion": emo, "feature": f, "expected": c.notation,
                          "tentative": c.tentative, "observed": obs.value,
                          "delta": deltas[f][emo], "matched": obs in c.accepted})
    n_bad = sum(not c["matched"] for c in cells)
    return {"cells": cells, "n_cells": len(cells), "n_mismatched": n_bad,
            "error_rate": n_bad / len(cells) if cells else 0.0,
            "features": feats}


# --- correlation ------------------------------------------------------------------

def instantaneous_hr(ecg: WaveformChannel, times) -> np.ndarray:
    """Beat-to-beat HR from R peaks, interpolated at ``times``."""
    peaks = dsp.detect_r_peaks(ecg)
    if peaks.size < 3:
        raise TooFewBeatsError("need at least three R peaks")
    mids = 0.5 * (peaks[1:] + peaks[:-1])
    return np.interp(times, mids, 60.0 / np.diff(peaks))


def extracted_rr(resp_ch: WaveformChannel, window: float = 6.0) -> tuple[np.ndarray, np.ndarray]:
    """Breathing rate per 1-s hop, stamped at the window centres."""
    rr = resp.extract_rr(resp_ch, window=window)
    return np.arange(rr.size) + window / 2.0, rr


def correlate_series(t_ref, ref, t_meas, meas) -> float:
    """Pearson r after interpolating the measured series onto the reference
    times inside their common span."""
    t_ref, ref = np.asarray(t_ref, float), np.asarray(ref, float)
    t_meas, meas = np.asarray(t_meas, float), np.asarray(meas, float)
    keep = (t_ref >= t_meas.min()) & (t_ref <= t_meas.max())
    if keep.sum() < 3:
        raise ValidationError("series do not overlap in time")
    return dsp.pearson(ref[keep], np.interp(t_ref[keep], t_meas, meas))


def self_consistency(bundle: Bundle) -> dict:
    """Correlation of commanded vs extracted HR and RR for one bundle."""
    ecg = bundle.channels["ecg"]
    t_hr = np.arange(bundle.hr.size) / cardio.CONTROL_RATE
    t_hr = t_hr[(t_hr > 2.0) & (t_hr < ecg.duration - 2.0)]
    hr_cmd = np.interp(t_hr, np.arange(bundle.hr.size) / cardio.CONTROL_RATE, bundle.hr)
    r_hr = dsp.pearson(hr_cmd, instantaneous_hr(ecg, t_hr))
    t_rr, rr = extracted_rr(bundle.channels["resp"])
    r_rr = correlate_series(np.arange(bundle.rr.size), bundle.rr, t_rr, rr)
    return {"hr": r_hr, "rr": r_rr}
