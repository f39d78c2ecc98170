"""Subject profiles and action/emotion timelines.

A :class:`Scenario` is an ordered list of non-overlapping events, each
holding an activity level (MET, or an action label looked up in a MET
table) and an emotion as valence/arousal on the 1-9 self-report scale.
Sampling a scenario at time ``t`` gives the drive signal that every
physiological model consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import (EmptyScenarioError, OutOfRangeError, OverlapError,
                     RangeError, ValidationError)

REST_MET = 1.0
NEUTRAL = 5.0
MIN_MET = 0.9
# m/s of walking-equivalent speed per MET above rest
VELOCITY_PER_MET = 0.45


@dataclass(frozen=True)
class SubjectProfile:
    age: int = 30
    gender: str = "male"
    lambda_: float = 0.5
    hr_rest: float = 70.0
    hr_min_override: Optional[float] = None
    vo2max_offset: float = 0.0
    body_mass: float = 70.0
    seed: int = 0

    def __post_init__(self):
        if int(self.age) != self.age or self.age < 1:
            raise RangeError(f"age must be an integer >= 1, got {self.age}")
        if self.gender not in ("male", "female"):
            raise RangeError(f"gender must be 'male' or 'female', got {self.gender!r}")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise RangeError(f"lambda must lie in [0, 1], got {self.lambda_}")
        if not 20.0 <= self.hr_rest <= 120.0:
            raise RangeError(f"hr_rest must lie in [20, 120], got {self.hr_rest}")
        if abs(self.vo2max_offset) > 0.4:
            raise RangeError("vo2max_offset must lie in [-0.4, 0.4]")
        if self.body_mass <= 0:
            raise RangeError("body_mass must be positive")
        if not 0 <= self.seed < 2**64:
            raise RangeError("seed must be a 64-bit unsigned integer")
        hr_min, hr_max = hr_bounds(self)
        if not hr_min < self.hr_rest < hr_max:
            raise RangeError(
                f"need hr_min < hr_rest < hr_max, got {hr_min:.1f}, {self.hr_rest}, {hr_max:.1f}")

    @classmethod
    def from_dict(cls, d: Mapping) -> "SubjectProfile":
        d = dict(d)
        if "lambda" in d:
            d["lambda_"] = d.pop("lambda")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown profile fields: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "age": self.age,
            "gender": self.gender,
            "lambda": self.lambda_,
            "hr_rest": self.hr_rest,
            "hr_min_override": self.hr_min_override,
            "vo2max_offset": self.vo2max_offset,
            "body_mass": self.body_mass,
            "seed": self.seed,
        }


def hr_bounds(profile: SubjectProfile) -> tuple[float, float]:
    """Return ``(hr_min, hr_max)`` in beats/min.

    ``hr_max`` follows the age regression 208 - 0.7 * age. Without an
    override, ``hr_min`` is 38 + 14 * (1 - lambda) kept at least 5 bpm
    below the resting rate.
    """
    hr_max = 208.0 - 0.7 * profile.age
    if profile.hr_min_override is not None:
        return float(profile.hr_min_override), hr_max
    hr_min = 38.0 + 14.0 * (1.0 - profile.lambda_)
    return min(hr_min, profile.hr_rest - 5.0), hr_max


@dataclass(frozen=True)
class ScenarioEvent:
    t_start: float
    duration: float
    met: Optional[float] = None
    action: Optional[str] = None
    valence: float = NEUTRAL
    arousal: float = NEUTRAL
    bvh: Optional[str] = None

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration


@dataclass(frozen=True)
class Scenario:
    events: tuple = ()
    total_duration: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))


@dataclass(frozen=True)
class DriveSample:
    met: float
    valence: float
    arousal: float
    velocity: float


def velocity_from_met(met):
    """Walking-equivalent speed (m/s) used when no skeleton is attached."""
    return np.maximum(0.0, (np.asarray(met, dtype=float) - REST_MET) * VELOCITY_PER_MET)


def normalize_affect(x):
    """Map the 1-9 rating scale onto [0, 1]."""
    return (np.asarray(x, dtype=float) - 1.0) / 8.0


def resolve_actions(scenario: Scenario, met_table: Mapping[str, float]) -> Scenario:
    """Replace action labels with their MET values."""
    from .bvh import met_for_action

    events = []
    for ev in scenario.events:
        if ev.met is None:
            if ev.action is None:
                raise ValidationError(f"event at t={ev.t_start} has neither met nor action")
            ev = replace(ev, met=met_for_action(ev.action, met_table))
        events.append(ev)
    return Scenario(events, scenario.total_duration)


def validate_scenario(scenario: Scenario) -> Scenario:
    if not scenario.events:
        raise EmptyScenarioError("scenario has no events")
    prev = None
    for ev in scenario.events:
        if ev.t_start < 0:
            raise RangeError(f"negative t_start {ev.t_start}")
        if not ev.duration > 0:
            raise RangeError(f"event at t={ev.t_start} has non-positive duration")
        if ev.met is not None and ev.met < MIN_MET:
            raise RangeError(f"MET {ev.met} below {MIN_MET}")
        for name in ("valence", "arousal"):
            value = getattr(ev, name)
            if not 1.0 <= value <= 9.0:
                raise RangeError(f"{name} {value} outside [1, 9]")
        if prev is not None:
            if ev.t_start < prev.t_start:
                raise ValidationError("events must be sorted by t_start")
            if ev.t_start < prev.t_end:
                raise OverlapError(
                    f"events [{prev.t_start}, {prev.t_end}) and [{ev.t_start}, {ev.t_end}) overlap")
        prev = ev
    if scenario.total_duration < scenario.events[-1].t_end:
        raise RangeError("total_duration ends before the last event")
    return scenario


def _event_met(ev: ScenarioEvent) -> float:
    if ev.met is None:
        raise ValidationError(f"event at t={ev.t_start} has an unresolved action {ev.action!r}")
    return ev.met


def sample_scenario(scenario: Scenario, t: float) -> DriveSample:
    if t < 0 or t > scenario.total_duration:
        raise OutOfRangeError(f"t={t} outside [0, {scenario.total_duration}]")
    for ev in scenario.events:
        if ev.t_start <= t < ev.t_end:
            met = _event_met(ev)
            return DriveSample(met, ev.valence, ev.arousal, float(velocity_from_met(met)))
    return DriveSample(REST_MET, NEUTRAL, NEUTRAL, 0.0)


def drive_series(scenario: Scenario, times: Sequence[float]) -> dict:
    """Vectorised :func:`sample_scenario` over a time grid.

    Returns a dict of arrays ``met``, ``valence``, ``arousal``,
    ``velocity`` and ``event_index`` (-1 in gaps).
    """
    times = np.asarray(times, dtype=float)
    if times.size and (times.min() < 0 or times.max() > scenario.total_duration):
        raise OutOfRangeError("time grid leaves the scenario span")
    met = np.full(times.shape, REST_MET)
    val = np.full(times.shape, NEUTRAL)
    aro = np.full(times.shape, NEUTRAL)
    idx = np.full(times.shape, -1, dtype=int)
    for k, ev in enumerate(scenario.events):
        inside = (times >= ev.t_start) & (times < ev.t_end)
        met[inside] = _event_met(ev)
        val[inside] = ev.valence
        aro[inside] = ev.arousal
        idx[inside] = k
    return {"met": met, "valence": val, "arousal": aro,
            "velocity": velocity_from_met(met), "event_index": idx}


# --- JSON I/O -------------------------------------------------------------

_EVENT_FIELDS = {"t_start", "duration", "met", "action", "valence", "arousal", "bvh"}


def scenario_from_json(obj: Union[list, dict], total_duration: Optional[float] = None) -> Scenario:
    """Build a scenario from the JSON file layout.

    Accepts either a bare array of events or ``{"events": [...],
    "total_duration": T}``.
    """
    if isinstance(obj, dict):
        total_duration = obj.get("total_duration", total_duration)
        obj = obj.get("events", [])
    events = []
    for raw in obj:
        unknown = set(raw) - _EVENT_FIELDS
        if unknown:
            raise ValidationError(f"unknown event fields: {sorted(unknown)}")
        try:
            events.append(ScenarioEvent(
                t_start=float(raw["t_start"]),
                duration=float(raw["duration"]),
                met=None if raw.get("met") is None else float(raw["met"]),
                action=raw.get("action"),
                valence=float(raw.get("valence", NEUTRAL)),
                arousal=float(raw.get("arousal", NEUTRAL)),
                bvh=raw.get("bvh"),
            ))
        except KeyError as exc:
            raise ValidationError(f"event missing field {exc}") from None
    events.sort(key=lambda e: e.t_start)
    if total_duration is None:
        total_duration = max((e.t_end for e in events), default=0.0)
    return Scenario(events, float(total_duration))


def scenario_to_json(scenario: Scenario) -> dict:
    out = []
    for ev in scenario.events:
        d = {"t_start": ev.t_start, "duration": ev.duration,
             "valence": ev.valence, "arousal": ev.arousal}
        if ev.met is not None:
            d["met"] = ev.met
        if ev.action is not None:
            d["action"] = ev.action
        if ev.bvh is not None:
            d["bvh"] = ev.bvh
        out.append(d)
    return {"events": out, "total_duration": scenario.total_duration}


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return scenario_from_json(json.load(fh))


def load_profile(path) -> SubjectProfile:
    with open(path, encoding="utf-8") as fh:
        return SubjectProfile.from_dict(json.load(fh))


def constant_scenario(duration: float, met: float = REST_MET,
                      valence: float = NEUTRAL, arousal: float = NEUTRAL) -> Scenario:
    return Scenario([ScenarioEvent(0.0, duration, met=met, valence=valence,
                                   arousal=arousal)], duration)
