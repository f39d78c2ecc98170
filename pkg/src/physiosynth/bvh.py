"""BVH motion-capture I/O, forward kinematics and motion-derived activity.

Rotations follow the usual BVH convention: each joint's rotation channels
are composed as intrinsic rotations in the order they are declared, in
degrees. The root position is its offset plus the position channels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Mapping, Optional, Union

import numpy as np

from .errors import (BVHSyntaxError, ChannelMismatchError, MissingSectionError,
                     TooShortError, UnknownActionError, ValidationError)
from .scenario import MIN_MET, REST_MET, VELOCITY_PER_MET

ROTATION_CHANNELS = ("Xrotation", "Yrotation", "Zrotation")
POSITION_CHANNELS = ("Xposition", "Yposition", "Zposition")


@dataclass
class Joint:
    name: str
    offset: np.ndarray
    channels: tuple = ()
    parent: int = -1
    end_site: bool = False

    @property
    def rotation_order(self) -> str:
        return "".join(c[0] for c in self.channels if c in ROTATION_CHANNELS)


@dataclass
class Skeleton:
    joints: list

    @property
    def joint_count(self) -> int:
        return sum(not j.end_site for j in self.joints)

    @property
    def channel_count(self) -> int:
        return sum(len(j.channels) for j in self.joints)

    def channel_slices(self) -> list:
        out, k = [], 0
        for j in self.joints:
            out.append(slice(k, k + len(j.channels)))
            k += len(j.channels)
        return out

    def channel_names(self) -> list[tuple[str, str]]:
        return [(j.name, c) for j in self.joints for c in j.channels]

    def layout(self):
        return [(j.name, j.channels, j.parent, j.end_site) for j in self.joints]

    def children(self, index: int) -> list[int]:
        return [k for k, j in enumerate(self.joints) if j.parent == index]


@dataclass
class MotionClip:
    skeleton: Skeleton
    frame_time: float
    frames: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        if self.frames.size == 0:
            self.frames = self.frames.reshape(0, self.skeleton.channel_count)
        if not self.frame_time > 0:
            raise ValidationError("frame_time must be positive")
        if self.frames.ndim != 2 or self.frames.shape[1] != self.skeleton.channel_count:
            raise ChannelMismatchError(
                f"frames must have {self.skeleton.channel_count} columns, got {self.frames.shape}")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def duration(self) -> float:
        return self.frame_count * self.frame_time

    def rotation_columns(self) -> np.ndarray:
        names = self.skeleton.channel_names()
        return np.array([k for k, (_, c) in enumerate(names) if c in ROTATION_CHANNELS], dtype=int)


# --- parsing ----------------------------------------------------------------

class _Tokens:
    def __init__(self, text: str):
        self.items = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            col = 0
            for part in line.split():
                col = line.index(part, col)
                self.items.append((part, lineno, col + 1))
                col += len(part)
        self.pos = 0

    def peek(self):
        return self.items[self.pos] if self.pos < len(self.items) else (None, None, None)

    def next(self, what="token"):
        if self.pos >= len(self.items):
            last = self.items[-1] if self.items else ("", 1, 1)
            raise BVHSyntaxError(f"unexpected end of file, expected {what}", last[1], last[2])
        tok = self.items[self.pos]
        self.pos += 1
        return tok

    def expect(self, word):
        tok, line, col = self.next(repr(word))
        if tok != word:
            raise BVHSyntaxError(f"expected {word!r}, found {tok!r}", line, col)

    def number(self, cast=float):
        tok, line, col = self.next("a number")
        try:
            return cast(tok)
        except ValueError:
            raise BVHSyntaxError(f"expected a number, found {tok!r}", line, col) from None


def _parse_joint(toks: _Tokens, joints: list, parent: int, name: str, line, col):
    toks.expect("{")
    toks.expect("OFFSET")
    offset = np.array([toks.number() for _ in range(3)])
    channels: tuple = ()
    tok, tline, tcol = toks.peek()
    if tok == "CHANNELS":
        toks.next()
        n = toks.number(int)
        chans = []
        for _ in range(n):
            c, cl, cc = toks.next("a channel name")
            if c not in ROTATION_CHANNELS + POSITION_CHANNELS:
                raise BVHSyntaxError(f"unknown channel {c!r}", cl, cc)
            chans.append(c)
        rot = [c for c in chans if c in ROTATION_CHANNELS]
        pos = [c for c in chans if c in POSITION_CHANNELS]
        if sorted(rot) != list(ROTATION_CHANNELS) or len(set(pos)) != len(pos) or \
                len(pos) not in (0, 3):
            raise BVHSyntaxError(
                f"joint {name!r} needs three distinct rotation channels "
                f"(plus optionally three position channels)", tline, tcol)
        channels = tuple(chans)
    else:
        raise BVHSyntaxError(f"joint {name!r} has no CHANNELS line", tline, tcol)
    index = len(joints)
    joints.append(Joint(name, offset, channels, parent))
    while True:
        tok, tline, tcol = toks.next("'JOINT', 'End' or '}'")
        if tok == "}":
            return
        if tok == "JOINT":
            child, cl, cc = toks.next("a joint name")
            _parse_joint(toks, joints, index, child, cl, cc)
        elif tok == "End":
            toks.expect("Site")
            toks.expect("{")
            toks.expect("OFFSET")
            end_off = np.array([toks.number() for _ in range(3)])
            toks.expect("}")
            joints.append(Joint(f"{name}_End", end_off, (), index, end_site=True))
        else:
            raise BVHSyntaxError(f"unexpected token {tok!r}", tline, tcol)


def parse_bvh(text: str) -> MotionClip:
    if "HIERARCHY" not in text:
        raise MissingSectionError("no HIERARCHY section")
    if "MOTION" not in text:
        raise MissingSectionError("no MOTION section")
    toks = _Tokens(text)
    toks.expect("HIERARCHY")
    toks.expect("ROOT")
    name, line, col = toks.next("the root name")
    joints: list = []
    _parse_joint(toks, joints, -1, name, line, col)
    tok, line, col = toks.peek()
    if tok == "ROOT":
        raise BVHSyntaxError("multiple ROOT joints are not supported", line, col)
    toks.expect("MOTION")
    toks.expect("Frames:")
    n_frames = toks.number(int)
    toks.expect("Frame")
    toks.expect("Time:")
    frame_time = toks.number()
    skeleton = Skeleton(joints)
    n_ch = skeleton.channel_count
    rest = toks.items[toks.pos:]
    # values are checked per line so a short frame is reported where it occurs
    by_line: dict = {}
    for tok, line, col in rest:
        by_line.setdefault(line, []).append((tok, col))
    rows = []
    for line in sorted(by_line):
        vals = by_line[line]
        if len(vals) != n_ch:
            raise ChannelMismatchError(
                f"line {line}: frame has {len(vals)} values, skeleton declares {n_ch} channels")
        try:
            rows.append([float(t) for t, _ in vals])
        except ValueError:
            bad = next((t, c) for t, c in vals if not _is_float(t))
            raise BVHSyntaxError(f"expected a number, found {bad[0]!r}", line, bad[1]) from None
    if len(rows) != n_frames:
        raise ChannelMismatchError(f"header declares {n_frames} frames, found {len(rows)}")
    frames = np.array(rows, dtype=float).reshape(len(rows), n_ch)
    return MotionClip(skeleton, frame_time, frames)


def _is_float(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def read_bvh(path) -> MotionClip:
    with open(path, encoding="utf-8") as fh:
        return parse_bvh(fh.read())


# --- writing ----------------------------------------------------------------

def _fmt(v: float) -> str:
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def write_bvh(clip: MotionClip) -> str:
    sk = clip.skeleton
    lines = ["HIERARCHY"]

    def emit(index: int, depth: int):
        j = sk.joints[index]
        pad = "  " * depth
        if j.end_site:
            lines.append(f"{pad}End Site")
            lines.append(f"{pad}{{")
            lines.append(f"{pad}  OFFSET {' '.join(_fmt(v) for v in j.offset)}")
            lines.append(f"{pad}}}")
            return
        kind = "ROOT" if j.parent < 0 else "JOINT"
        lines.append(f"{pad}{kind} {j.name}")
        lines.append(f"{pad}{{")
        lines.append(f"{pad}  OFFSET {' '.join(_fmt(v) for v in j.offset)}")
        lines.append(f"{pad}  CHANNELS {len(j.channels)} {' '.join(j.channels)}")
        for child in sk.children(index):
            emit(child, depth + 1)
        lines.append(f"{pad}}}")

    emit(0, 0)
    lines.append("MOTION")
    lines.append(f"Frames: {clip.frame_count}")
    lines.append(f"Frame Time: {clip.frame_time:.6f}")
    for row in clip.frames:
        lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def save_bvh(clip: MotionClip, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(write_bvh(clip))


# --- kinematics -------------------------------------------------------------

def _axis_rotation(axis: str, deg: np.ndarray) -> np.ndarray:
    r = np.deg2rad(deg)
    c, s = np.cos(r), np.sin(r)
    one, zero = np.ones_like(r), np.zeros_like(r)
    if axis == "X":
        m = [[one, zero, zero], [zero, c, -s], [zero, s, c]]
    elif axis == "Y":
        m = [[c, zero, s], [zero, one, zero], [-s, zero, c]]
    else:
        m = [[c, -s, zero], [s, c, zero], [zero, zero, one]]
    return np.moveaxis(np.array(m), (0, 1), (-2, -1))


def _global_positions(clip: MotionClip, frames: np.ndarray, scale: float = 1.0,
                      include_end_sites: bool = False) -> np.ndarray:
    sk = clip.skeleton
    n = frames.shape[0]
    slices = sk.channel_slices()
    rots = [None] * len(sk.joints)
    pos = np.zeros((n, len(sk.joints), 3))
    for k, j in enumerate(sk.joints):
        vals = frames[:, slices[k]]
        local = np.broadcast_to(np.eye(3), (n, 3, 3)).copy()
        trans = np.zeros((n, 3))
        for ci, ch in enumerate(j.channels):
            if ch in ROTATION_CHANNELS:
                local = local @ _axis_rotation(ch[0], vals[:, ci])
            else:
                trans[:, "XYZ".index(ch[0])] = vals[:, ci]
        if j.parent < 0:
            pos[:, k] = j.offset + trans
            rots[k] = local
        else:
            prot = rots[j.parent]
            pos[:, k] = pos[:, j.parent] + np.einsum("nij,j->ni", prot, j.offset) + \
                np.einsum("nij,nj->ni", prot, trans)
            rots[k] = prot @ local
    if not include_end_sites:
        pos = pos[:, [k for k, j in enumerate(sk.joints) if not j.end_site]]
    return pos * scale


def forward_kinematics(clip: MotionClip, frame_index: int, scale: float = 1.0,
                       include_end_sites: bool = False) -> np.ndarray:
    """Global joint positions ``(joints, 3)`` for one frame."""
    if not -clip.frame_count <= frame_index < clip.frame_count:
        raise IndexError(f"frame {frame_index} out of range for {clip.frame_count} frames")
    return _global_positions(clip, clip.frames[[frame_index]], scale, include_end_sites)[0]


def all_positions(clip: MotionClip, scale: float = 1.0) -> np.ndarray:
    """Global positions for every frame, shape ``(frames, joints, 3)``."""
    return _global_positions(clip, clip.frames, scale)


def mean_joint_speed(clip: MotionClip, window: float, scale: float = 1.0) -> np.ndarray:
    """Mean joint speed (m/s) in consecutive windows of ``window`` seconds.

    Per frame step the speed is averaged over joints; each output value is
    the mean of those speeds across the steps inside one window.
    ``scale`` converts file length units to metres.
    """
    if window < 2 * clip.frame_time:
        raise TooShortError("window must span at least two frames")
    steps_per_win = int(round(window / clip.frame_time))
    if clip.frame_count - 1 < steps_per_win:
        raise TooShortError("clip is shorter than one window")
    pos = all_positions(clip, scale)
    speed = np.linalg.norm(np.diff(pos, axis=0), axis=2).mean(axis=1) / clip.frame_time
    n_win = speed.size // steps_per_win
    return speed[:n_win * steps_per_win].reshape(n_win, steps_per_win).mean(axis=1)


# --- activity ---------------------------------------------------------------

def load_met_table(path=None) -> dict:
    if path is None:
        text = resources.files("physiosynth.data").joinpath("met_table.json").read_text("utf-8")
        raw = json.loads(text)
    else:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    table = {k: float(v) for k, v in raw.items() if not k.startswith("_")}
    low = {k: v for k, v in table.items() if v < MIN_MET}
    if low:
        raise ValidationError(f"MET values below {MIN_MET}: {low}")
    return table


def met_for_action(action: Union[str, float], table: Optional[Mapping[str, float]] = None) -> float:
    """MET for an action label, or for a walking-equivalent speed (m/s)."""
    if isinstance(action, str):
        table = load_met_table() if table is None else table
        try:
            return float(table[action])
        except KeyError:
            raise UnknownActionError(f"unknown action {action!r}") from None
    v = float(action)
    if v < 0:
        raise ValidationError("velocity must be non-negative")
    return REST_MET + v / VELOCITY_PER_MET


def loop_to_duration(clip: MotionClip, duration: float) -> MotionClip:
    """Repeat (or cut) a clip so it covers ``duration`` seconds."""
    n = int(round(duration / clip.frame_time))
    if clip.frame_count == 0:
        raise TooShortError("cannot loop an empty clip")
    idx = np.arange(n) % clip.frame_count
    return replace(clip, frames=clip.frames[idx].copy())
