"""Recording model and cohort directory I/O.

A recording directory holds ``meta.json`` plus little-endian float32 raw
files ``audio.f32``, ``eda.f32``, ``hr.f32``, ``rsp_rate.f32``,
``rsp_amp.f32``.  A cohort directory holds ``cohort.json``:

    {"subjects": [{"id": ..., "label": "CWS"|"CWNS",
                   "recordings": [relative paths]}, ...]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ContractError

AUDIO_RATE = 10000
PHYSIO_RATE = 1250
LABELS = ("CWS", "CWNS")
CONDITIONS = ("stress", "narrative", "baseline")
PHYSIO_FILES = ("eda", "hr", "rsp_rate", "rsp_amp")


@dataclass
class Recording:
    subject_id: str
    label: str
    condition: str
    audio: np.ndarray                     # float64, AUDIO_RATE Hz
    physio: dict[str, np.ndarray]         # float64, PHYSIO_RATE Hz per channel
    duration_s: float = field(default=0.0)

    def __post_init__(self):
        if self.label not in LABELS:
            raise ContractError(f"label must be one of {LABELS}, got {self.label!r}")
        if self.condition not in CONDITIONS:
            raise ContractError(f"condition must be one of {CONDITIONS}, got {self.condition!r}")
        if not self.duration_s:
            self.duration_s = len(self.audio) / AUDIO_RATE
        if abs(len(self.audio) - AUDIO_RATE * self.duration_s) > 1:
            raise ContractError(
                f"audio length {len(self.audio)} inconsistent with duration {self.duration_s}s"
            )
        for ch in PHYSIO_FILES:
            if ch not in self.physio:
                raise ContractError(f"missing physiological channel {ch!r}")
            n = len(self.physio[ch])
            if abs(n - PHYSIO_RATE * self.duration_s) > 1:
                raise ContractError(
                    f"channel {ch} length {n} inconsistent with duration {self.duration_s}s"
                )


def save_recording(directory, rec: Recording) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    meta = {
        "subject_id": rec.subject_id,
        "label": rec.label,
        "condition": rec.condition,
        "audio_rate": AUDIO_RATE,
        "physio_rate": PHYSIO_RATE,
        "duration_s": rec.duration_s,
    }
    (directory / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    (directory / "audio.f32").write_bytes(rec.audio.astype("<f4").tobytes())
    for ch in PHYSIO_FILES:
        (directory / f"{ch}.f32").write_bytes(rec.physio[ch].astype("<f4").tobytes())


def load_recording(directory) -> Recording:
    directory = Path(directory)
    meta = json.loads((directory / "meta.json").read_text())
    if meta.get("audio_rate") != AUDIO_RATE or meta.get("physio_rate") != PHYSIO_RATE:
        raise ContractError(
            f"{directory}: unsupported sample rates "
            f"{meta.get('audio_rate')}/{meta.get('physio_rate')}"
        )
    audio = np.frombuffer((directory / "audio.f32").read_bytes(), dtype="<f4").astype(np.float64)
    physio = {
        ch: np.frombuffer((directory / f"{ch}.f32").read_bytes(), dtype="<f4").astype(np.float64)
        for ch in PHYSIO_FILES
    }
    return Recording(
        subject_id=meta["subject_id"],
        label=meta["label"],
        condition=meta["condition"],
        audio=audio,
        physio=physio,
        duration_s=meta["duration_s"],
    )


@dataclass
class Subject:
    subject_id: str
    label: str
    recordings: list[Recording]

    def baseline(self) -> Recording:
        for rec in self.recordings:
            if rec.condition == "baseline":
                return rec
        raise ContractError(f"subject {self.subject_id} has no baseline recording")

    def experimental(self) -> list[Recording]:
        return [r for r in self.recordings if r.condition != "baseline"]


def save_cohort_manifest(cohort_dir, entries: list[dict]) -> None:
    cohort_dir = Path(cohort_dir)
    cohort_dir.mkdir(parents=True, exist_ok=True)
    payload = {"subjects": entries}
    (cohort_dir / "cohort.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_cohort(cohort_dir) -> list[Subject]:
    cohort_dir = Path(cohort_dir)
    manifest = json.loads((cohort_dir / "cohort.json").read_text())
    subjects = []
    for entry in manifest["subjects"]:
        recs = [load_recording(cohort_dir / rel) for rel in entry["recordings"]]
        subjects.append(Subject(subject_id=entry["id"], label=entry["label"], recordings=recs))
    return subjects
