"""Window feature assembly, dataset construction, and the feature cache."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import checkpoint
from ..errors import ContractError
from . import acoustic, melspec, physio, windowing
from .recording import Recording, Subject, load_cohort


@dataclass
class WindowFeatures:
    """One 5 s example: 19 mel spectrograms plus 19 change-score vectors."""

    subject_id: str
    label: str
    window_index: int
    mel: np.ndarray                    # (19, 64, 10)
    change: np.ndarray                 # (19, 8)
    raw_physio: np.ndarray | None = None     # (19, 24)
    raw_acoustic: np.ndarray | None = None   # (19, 228)

    def __post_init__(self):
        if self.mel.shape != (windowing.N_SEGMENTS, melspec.N_MELS, melspec.N_FRAMES):
            raise ContractError(f"mel features have shape {self.mel.shape}")
        if self.change.shape != (windowing.N_SEGMENTS, 8):
            raise ContractError(f"change-score features have shape {self.change.shape}")


def baseline_profile(subject: Subject) -> physio.BaselineProfile:
    segments = windowing.segment_recording_physio(subject.baseline())
    return physio.BaselineProfile.from_segments(subject.subject_id, segments)


def extract_window(recording: Recording, window_start_s: float,
                   profile: physio.BaselineProfile, window_index: int = 0,
                   with_raw: bool = True) -> WindowFeatures:
    slices = windowing.segment_window(recording, window_start_s)
    mel = np.stack([melspec.mel_spectrogram(a) for a in slices.audio])
    change = np.stack([physio.change_score(p, profile).values for p in slices.physio])
    raw_p = raw_a = None
    if with_raw:
        raw_p = np.stack([physio.raw_physio(p) for p in slices.physio])
        raw_a = np.stack([acoustic.raw_acoustic(a).features for a in slices.audio])
    return WindowFeatures(
        subject_id=recording.subject_id, label=recording.label,
        window_index=window_index, mel=mel, change=change,
        raw_physio=raw_p, raw_acoustic=raw_a,
    )


def subject_windows(subject: Subject, with_raw: bool = True) -> list[WindowFeatures]:
    """Non-overlapping 5 s windows over every experimental recording."""
    profile = baseline_profile(subject)
    out = []
    idx = 0
    for rec in subject.experimental():
        n = int(rec.duration_s // windowing.WINDOW_S)
        for w in range(n):
            out.append(extract_window(rec, w * windowing.WINDOW_S, profile, idx, with_raw))
            idx += 1
    return out


def build_dataset(cohort_dir, with_raw: bool = True) -> list[WindowFeatures]:
    windows = []
    for subject in load_cohort(cohort_dir):
        windows.extend(subject_windows(subject, with_raw))
    return windows


@dataclass
class BandStats:
    """Per-mel-band pixel statistics over a set of windows (dB domain)."""

    mean: np.ndarray   # (64,)
    std: np.ndarray    # (64,)
    pixel_mean: np.ndarray = field(default=None)  # (19, 64, 10) per-pixel mean

    @classmethod
    def from_windows(cls, windows: list[WindowFeatures]) -> "BandStats":
        if not windows:
            raise ContractError("band statistics need at least one window")
        stack = np.stack([w.mel for w in windows])      # (W, 19, 64, 10)
        mean = stack.mean(axis=(0, 1, 3))
        std = stack.std(axis=(0, 1, 3))
        return cls(mean=mean, std=std, pixel_mean=stack.mean(axis=0))


# --- feature cache -------------------------------------------------------

def save_window_cache(out_dir, windows: list[WindowFeatures]) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = []
    for w in windows:
        fname = f"{w.subject_id}_{w.window_index:04d}.pasd"
        arrays = {
            "mel": w.mel,
            "change": w.change,
            "label": np.asarray(1.0 if w.label == "CWS" else 0.0),
        }
        if w.raw_physio is not None:
            arrays["raw_physio"] = w.raw_physio
        if w.raw_acoustic is not None:
            arrays["raw_acoustic"] = w.raw_acoustic
        checkpoint.save_arrays(out_dir / fname, arrays)
        index.append({
            "subject_id": w.subject_id,
            "label": w.label,
            "window_index": w.window_index,
            "file": fname,
        })
    (out_dir / "index.json").write_text(json.dumps({"windows": index}, sort_keys=True, indent=2) + "\n")


def load_window_cache(cache_dir) -> list[WindowFeatures]:
    cache_dir = Path(cache_dir)
    index = json.loads((cache_dir / "index.json").read_text())
    windows = []
    for entry in index["windows"]:
        arrays = checkpoint.load_arrays(cache_dir / entry["file"])
        windows.append(WindowFeatures(
            subject_id=entry["subject_id"],
            label=entry["label"],
            window_index=entry["window_index"],
            mel=arrays["mel"],
            change=arrays["change"],
            raw_physio=arrays.get("raw_physio"),
            raw_acoustic=arrays.get("raw_acoustic"),
        ))
    return windows
