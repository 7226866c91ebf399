"""Segment grid over 5-second classification windows.

A window has 19 segments of 500 ms with 250 ms overlap (offsets 0, 250,
..., 4500 ms; the last segment ends exactly at 5000 ms).  At 10 kHz the
audio offsets are multiples of 2500 samples; at 1250 Hz the physiological
offset of segment i is floor(i * 312.5) = (i * 625) // 2 samples, and
every segment is 625 samples long.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from .recording import AUDIO_RATE, PHYSIO_RATE, Recording

N_SEGMENTS = 19
SEGMENT_MS = 500
HOP_MS = 250
WINDOW_S = 5.0

AUDIO_SEGMENT = AUDIO_RATE * SEGMENT_MS // 1000      # 5000
AUDIO_HOP = AUDIO_RATE * HOP_MS // 1000              # 2500
PHYSIO_SEGMENT = PHYSIO_RATE * SEGMENT_MS // 1000    # 625


def segment_offsets_ms() -> np.ndarray:
    return np.arange(N_SEGMENTS) * HOP_MS


def audio_segment_bounds(i: int) -> tuple[int, int]:
    start = i * AUDIO_HOP
    return start, start + AUDIO_SEGMENT


def physio_segment_bounds(i: int) -> tuple[int, int]:
    start = (i * PHYSIO_SEGMENT) // 2
    return start, start + PHYSIO_SEGMENT


@dataclass
class WindowSlices:
    """Raw per-segment slices of one 5 s window."""

    audio: list[np.ndarray]                 # 19 x (5000,)
    physio: list[dict[str, np.ndarray]]     # 19 x {channel: (625,)}


def segment_window(recording: Recording, window_start_s: float) -> WindowSlices:
    if window_start_s < 0 or window_start_s + WINDOW_S > recording.duration_s + 1e-9:
        raise ContractError(
            f"window [{window_start_s}, {window_start_s + WINDOW_S}) s exceeds "
            f"recording of {recording.duration_s} s"
        )
    a0 = int(round(window_start_s * AUDIO_RATE))
    p0 = int(round(window_start_s * PHYSIO_RATE))
    audio_slices = []
    physio_slices = []
    for i in range(N_SEGMENTS):
        s, e = audio_segment_bounds(i)
        audio_slices.append(recording.audio[a0 + s:a0 + e])
        s, e = physio_segment_bounds(i)
        physio_slices.append({ch: x[p0 + s:p0 + e] for ch, x in recording.physio.items()})
    return WindowSlices(audio=audio_slices, physio=physio_slices)


def segment_recording_physio(recording: Recording) -> list[dict[str, np.ndarray]]:
    """All 500 ms physio segments of a recording on the 250 ms hop grid."""
    n_hops = int(recording.duration_s * 1000 - SEGMENT_MS) // HOP_MS + 1
    segments = []
    for i in range(max(n_hops, 1)):
        s, e = physio_segment_bounds(i)
        if e > min(len(x) for x in recording.physio.values()):
            break
        segments.append({ch: x[s:e] for ch, x in recording.physio.items()})
    return segments
