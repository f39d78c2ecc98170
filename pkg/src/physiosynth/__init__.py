"""Synthetic multi-signal physiology (ECG, BP, respiration, SCR) driven by
action and emotion timelines, with BVH motion handling."""

__version__ = "0.1.0"
