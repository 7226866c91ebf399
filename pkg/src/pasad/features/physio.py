"""Physiological segment features: HLD functionals and change scores.

Each 500 ms physiological segment is summarized per channel by six
functionals (min, max, std, var, mean, median; population variance).
Change scores compare a segment's per-channel functional vector against
the same subject's average functional vector from the baseline-condition
recording, via cosine similarity and Euclidean distance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

HLD_NAMES = ("min", "max", "std", "var", "mean", "median")

# channel order used for the raw 24-dim feature vector
RAW_CHANNELS = ("hr", "eda", "rsp_rate", "rsp_amp")
# channel order used for the 8-dim change-score vector (cos, dist) pairs
CHANGE_CHANNELS = ("hr", "eda", "rsp_amp", "rsp_rate")


def hld(values: np.ndarray) -> np.ndarray:
    """The six functionals of one channel segment (population statistics)."""
    v = np.asarray(values, dtype=np.float64)
    std = v.std()
    return np.array([v.min(), v.max(), std, std * std, v.mean(), np.median(v)])


def raw_physio(segment: dict[str, np.ndarray]) -> np.ndarray:
    """24 raw features: HLD functionals per channel, HR/EDA/RSP-rate/RSP-amp order."""
    return np.concatenate([hld(segment[ch]) for ch in RAW_CHANNELS])


@dataclass
class BaselineProfile:
    """Per-channel HLD vectors averaged over a subject's baseline segments."""

    subject_id: str
    vectors: dict[str, np.ndarray]  # channel -> (6,)

    @classmethod
    def from_segments(cls, subject_id: str, segments: list[dict[str, np.ndarray]]) -> "BaselineProfile":
        if not segments:
            raise ValueError("baseline profile needs at least one segment")
        vectors = {}
        for ch in RAW_CHANNELS:
            vectors[ch] = np.mean([hld(seg[ch]) for seg in segments], axis=0)
        return cls(subject_id=subject_id, vectors=vectors)


@dataclass
class ChangeScore:
    """Cosine/distance pairs per channel against the baseline profile."""

    values: np.ndarray                      # (8,) interleaved (cos, dist)
    zero_norm_channels: tuple = field(default_factory=tuple)

    @property
    def cosines(self) -> np.ndarray:
        return self.values[0::2]

    @property
    def distances(self) -> np.ndarray:
        return self.values[1::2]


def cosine_and_distance(a: np.ndarray, b: np.ndarray) -> tuple[float, float, bool]:
    """Returns (cosine, euclidean distance, zero_norm_flag).

    A zero-norm operand makes the cosine undefined; it is reported as 0.
    """
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    dist = float(np.linalg.norm(a - b))
    if na == 0.0 or nb == 0.0:
        return 0.0, dist, True
    return float(np.dot(a, b) / (na * nb)), dist, False


def change_score(segment: dict[str, np.ndarray], baseline: BaselineProfile) -> ChangeScore:
    """8 change-score features for one segment: HR, EDA, RSP-amp, RSP-rate."""
    values = np.empty(8, dtype=np.float64)
    flagged = []
    for i, ch in enumerate(CHANGE_CHANNELS):
        cos, dist, zero = cosine_and_distance(hld(segment[ch]), baseline.vectors[ch])
        if zero:
            flagged.append(ch)
            log.warning("zero-norm HLD vector for channel %s; cosine reported as 0", ch)
        values[2 * i] = cos
        values[2 * i + 1] = dist
    return ChangeScore(values=values, zero_norm_channels=tuple(flagged))
