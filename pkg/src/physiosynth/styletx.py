"""Spectral style transfer between motion clips.

For every rotation channel the target's magnitude spectrum is shifted by
the difference between a style source and a style reference, weighted per
frequency by the target's own normalised magnitude. Phases stay those of
the target, so timing is preserved.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import dsp
from .bvh import MotionClip
from .errors import DegenerateChannelError, SkeletonMismatchError, TooShortError


@dataclass
class ChannelSpectrum:
    magnitude: np.ndarray
    phase: np.ndarray

    @property
    def length(self) -> int:
        return self.magnitude.size


def channel_spectrum(x) -> ChannelSpectrum:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise TooShortError("need at least two samples")
    spec = dsp.dft(x)
    return ChannelSpectrum(np.abs(spec), np.angle(spec))


def _next_pow2(n: int) -> int:
    return 1 << max(int(n) - 1, 1).bit_length()


def stylized_spectrum(target, source, reference, strict: bool = False) -> ChannelSpectrum:
    """Stylised magnitude and (unchanged) target phase for one channel.

    All three series are zero-padded to a common power-of-two length.
    """
    target = np.asarray(target, dtype=float)
    source = np.asarray(source, dtype=float)
    reference = np.asarray(reference, dtype=float)
    n = _next_pow2(max(target.size, source.size, reference.size, 2))

    def spec(x):
        return channel_spectrum(np.pad(x, (0, n - x.size)))

    t, s, r = spec(target), spec(source), spec(reference)
    peak = t.magnitude.max()
    if peak > 0:
        weight = t.magnitude / peak
    else:
        if strict:
            raise DegenerateChannelError("target channel has an all-zero spectrum")
        weight = np.zeros_like(t.magnitude)
    mag = np.maximum(t.magnitude + weight * (s.magnitude - r.magnitude), 0.0)
    return ChannelSpectrum(mag, t.phase)


def transfer_channel(target, source, reference, strict: bool = False) -> np.ndarray:
    """Apply the style delta ``source - reference`` to one channel, cut to
    the target length."""
    spec = stylized_spectrum(target, source, reference, strict)
    out = dsp.idft(spec.magnitude * np.exp(1j * spec.phase)).real
    return out[:np.asarray(target).size]


def transfer_style(target: MotionClip, style_source: MotionClip,
                   style_reference: MotionClip, strict: bool = False) -> MotionClip:
    """Stylise ``target`` with the difference between two clips of another action.

    Rotation channels are transformed; root position channels are copied
    from the target unchanged. With ``strict`` an all-zero target channel
    raises :class:`DegenerateChannelError`; otherwise its weight is 0 and
    the channel passes through.
    """
    layout = target.skeleton.layout()
    if style_source.skeleton.layout() != layout or style_reference.skeleton.layout() != layout:
        raise SkeletonMismatchError("all three clips must share one skeleton and channel layout")
    frames = target.frames.copy()
    if target.frame_count < 2:
        raise TooShortError("target clip needs at least two frames")
    for col in target.rotation_columns():
        frames[:, col] = transfer_channel(target.frames[:, col], style_source.frames[:, col],
                                          style_reference.frames[:, col], strict=strict)
    return replace(target, frames=frames)
