"""Synthetic cohorts with controllable physiology-coupled spectral structure.

Speech is source-filter synthesized: a band-limited harmonic source at a
jittered fundamental drives two cascaded second-order resonators whose
center frequencies follow slowly varying tracks, plus a pink-noise
floor.

The latent arousal is bursty: a calm floor with short smooth excursions
at random times, and the physiological channels follow it for both
classes.  Every recording also carries an independent "decoy" process
with the same burst statistics (its rate varies per subject).  The
formant-track jitter magnitude is

    base + subject_nuisance + common_coupling * decoy(t)
         + [class A only]  jitter_offset + kappa * arousal(t)

clipped below at a small positive floor.  With common_coupling matched
to kappa, jitter bursts have the same height in both classes, burst
counts are Poisson-ambiguous, and the fixed offset hides under the
per-subject nuisance, so burst presence alone does not separate the
classes; what separates them is whether the jitter bursts COINCIDE with
the physiological bursts, which only class A's do.  At kappa = 0 the
classes differ by the fixed marginal offset alone.  Arousal statistics
are identical across classes, so physiology by itself carries no class
information.  Ground-truth latent tracks are stored next to each
recording for validation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from . import checkpoint
from .errors import ConfigError
from .features.pipeline import BandStats, WindowFeatures
from .features.recording import AUDIO_RATE, PHYSIO_RATE, Recording, save_cohort_manifest, save_recording
from .rng import derive

CONTROL_HZ = 40          # latent tracks update every 25 ms
BASELINE_DURATION_S = 30.0


@dataclass(frozen=True)
class SynthSpec:
    subjects_per_class: int = 10
    windows_per_subject: int = 3
    seed: int = 7
    jitter_offset_hz: float = 30.0    # class-A marginal formant jitter
    kappa: float = 5.0                # arousal -> jitter coupling, class A only
    common_coupling: float = 5.0      # decoy -> jitter coupling, both classes
    base_jitter_hz: float = 2.0       # shared by both classes
    subject_jitter_spread_hz: float = 70.0  # per-subject nuisance, both classes
    f0_jitter_hz: float = 6.0
    f0_base_hz: float = 250.0
    f1_base_hz: float = 700.0
    f2_base_hz: float = 1800.0
    arousal_max: float = 6.0
    burst_rate_hz: float = 0.22       # arousal bursts per second
    burst_duration_s: float = 0.8
    decoy_rate_spread: float = 3.5    # per-subject decoy-rate multiplier range
    eda_base_us: float = 4.0
    eda_drift_gain: float = 1.5       # uS per arousal unit
    hr_base_bpm: float = 95.0
    hr_excursion_bpm: float = 6.0     # bpm per arousal unit
    noise_floor: float = 0.01
    jitter_floor_hz: float = 0.5

    def __post_init__(self):
        if self.kappa < 0:
            raise ConfigError("coupling gain must be non-negative")
        for name in ("jitter_offset_hz", "base_jitter_hz", "f0_jitter_hz",
                     "subject_jitter_spread_hz"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "SynthSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class Latents:
    f0: np.ndarray       # control-rate tracks
    f1: np.ndarray
    f2: np.ndarray
    arousal: np.ndarray


def _smooth_walk(rng, n: int, smoothing: float = 0.05) -> np.ndarray:
    """Zero-mean unit-ish smooth process at control rate (one-pole filtered)."""
    white = rng.standard_normal(n)
    out = lfilter([smoothing], [1.0, -(1.0 - smoothing)], white)
    scale = np.sqrt(smoothing / 2.0)  # stationary std of the one-pole filter
    return out / scale


def _burst_track(rng, n: int, max_level: float, rate_hz: float,
                 duration_s: float, floor: float = 0.2) -> np.ndarray:
    """Calm floor plus smooth raised-cosine bursts at Poisson times."""
    out = np.full(n, floor)
    width = max(int(duration_s * CONTROL_HZ), 2)
    n_bursts = rng.poisson(rate_hz * n / CONTROL_HZ)
    pulse = 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(width) / width))
    for _ in range(n_bursts):
        start = int(rng.integers(0, max(n - width, 1)))
        amp = rng.uniform(0.5 * max_level, max_level)
        out[start:start + width] = np.maximum(out[start:start + width],
                                              floor + amp * pulse[:n - start])
    return np.minimum(out, max_level)


def _resonator_coeffs(freq_hz: float, bandwidth_hz: float, sr: int):
    r = np.exp(-np.pi * bandwidth_hz / sr)
    theta = 2.0 * np.pi * freq_hz / sr
    return np.array([1.0, -2.0 * r * np.cos(theta), r * r])


def _pink_noise(rng, n: int) -> np.ndarray:
    """Approximate 1/f noise (Kellet filter cascade)."""
    b = [0.049922035, -0.095993537, 0.050612699, -0.004408786]
    a = [1.0, -2.494956002, 2.017265875, -0.522189400]
    return lfilter(b, a, rng.standard_normal(n))


def synthesize_audio(rng, duration_s: float, latents: Latents, spec: SynthSpec) -> np.ndarray:
    """Harmonic source through time-varying two-formant resonators."""
    n = int(round(duration_s * AUDIO_RATE))
    block = AUDIO_RATE // CONTROL_HZ
    f0 = np.repeat(latents.f0, block)[:n]
    phase = 2.0 * np.pi * np.cumsum(f0) / AUDIO_RATE
    source = np.zeros(n)
    max_harmonics = int(4000.0 // max(spec.f0_base_hz, 1.0))
    for k in range(1, max_harmonics + 1):
        source += np.sin(k * phase) / k
    out = source
    for track, bw in ((latents.f1, 90.0), (latents.f2, 120.0)):
        filtered = np.empty(n)
        zi = np.zeros(2)
        for i, freq in enumerate(track):
            lo = i * block
            if lo >= n:
                break
            hi = min(lo + block, n)
            a = _resonator_coeffs(float(freq), bw, AUDIO_RATE)
            filtered[lo:hi], zi = lfilter([1.0], a, out[lo:hi], zi=zi)
        out = filtered
    peak = np.abs(out).max()
    if peak > 0:
        out = 0.9 * out / peak
    out = out + spec.noise_floor * _pink_noise(rng, n)
    peak = np.abs(out).max()
    if peak > 1.0:
        out = out / peak
    return out


def synthesize_physio(rng, duration_s: float, arousal: np.ndarray,
                      spec: SynthSpec) -> dict[str, np.ndarray]:
    n = int(round(duration_s * PHYSIO_RATE))
    block = PHYSIO_RATE // CONTROL_HZ  # 31 samples per control step
    grid = np.repeat(arousal, block)
    grid = np.pad(grid, (0, max(0, n - grid.size)), mode="edge")[:n]

    # per-channel noise consumed sequentially from the caller's generator
    eda = np.clip(spec.eda_base_us + spec.eda_drift_gain * grid
                  + 0.05 * _smooth_walk(rng, n, 0.01), 0.0, 20.0)
    hr = np.clip(spec.hr_base_bpm + spec.hr_excursion_bpm * grid
                 + 1.0 * _smooth_walk(rng, n, 0.01), 60.0, 160.0)
    rsp_rate = np.clip(18.0 + 1.2 * grid + 0.6 * _smooth_walk(rng, n, 0.01), 8.0, 40.0)
    rsp_amp = np.clip(1.0 + 0.15 * grid + 0.05 * _smooth_walk(rng, n, 0.01), 0.1, 4.0)
    return {"eda": eda, "hr": hr, "rsp_rate": rsp_rate, "rsp_amp": rsp_amp}


def generate_recording(spec: SynthSpec, subject_seed_rng, subject_id: str, label: str,
                       condition: str, duration_s: float,
                       subject_jitter_hz: float,
                       decoy_rate_mult: float = 1.0) -> tuple[Recording, Latents]:
    rng = subject_seed_rng
    n_ctrl = int(round(duration_s * CONTROL_HZ))
    if condition == "baseline":
        arousal = np.full(n_ctrl, 0.2)
        decoy = np.full(n_ctrl, 0.2)
    else:
        arousal = _burst_track(rng, n_ctrl, spec.arousal_max,
                               spec.burst_rate_hz, spec.burst_duration_s)
        decoy = _burst_track(rng, n_ctrl, spec.arousal_max,
                             spec.burst_rate_hz * decoy_rate_mult,
                             spec.burst_duration_s)

    jitter_std = (spec.base_jitter_hz + subject_jitter_hz
                  + spec.common_coupling * decoy)
    if label == "CWS" and condition != "baseline":
        jitter_std = jitter_std + spec.jitter_offset_hz + spec.kappa * arousal
    jitter_std = np.maximum(jitter_std, spec.jitter_floor_hz)

    f0 = spec.f0_base_hz + spec.f0_jitter_hz * _smooth_walk(rng, n_ctrl, 0.2)
    f1 = spec.f1_base_hz + jitter_std * _smooth_walk(rng, n_ctrl, 0.35)
    f2 = spec.f2_base_hz + jitter_std * 1.5 * _smooth_walk(rng, n_ctrl, 0.35)
    f0 = np.clip(f0, 120.0, 400.0)
    f1 = np.clip(f1, 350.0, 1100.0)
    f2 = np.clip(f2, 1200.0, 2600.0)
    latents = Latents(f0=f0, f1=f1, f2=f2, arousal=arousal)

    audio = synthesize_audio(rng, duration_s, latents, spec)
    physio = synthesize_physio(rng, duration_s, arousal, spec)
    rec = Recording(subject_id=subject_id, label=label, condition=condition,
                    audio=audio, physio=physio, duration_s=duration_s)
    return rec, latents


def save_latents(directory, latents: Latents) -> None:
    checkpoint.save_arrays(Path(directory) / "latents.pasd", {
        "f0": latents.f0, "f1": latents.f1, "f2": latents.f2, "arousal": latents.arousal,
    })


def load_latents(directory) -> Latents:
    arrays = checkpoint.load_arrays(Path(directory) / "latents.pasd")
    return Latents(f0=arrays["f0"], f1=arrays["f1"], f2=arrays["f2"],
                   arousal=arrays["arousal"])


def generate_cohort(spec: SynthSpec, out_dir) -> Path:
    """Write a cohort directory; byte-identical for identical specs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    exp_duration = spec.windows_per_subject * 5.0
    idx = 0
    for label, count in (("CWS", spec.subjects_per_class), ("CWNS", spec.subjects_per_class)):
        for j in range(count):
            subject_id = f"S{idx:03d}"
            nuisance_rng = derive(spec.seed, "subject-nuisance", idx)
            subject_jitter = float(nuisance_rng.uniform(0.0, spec.subject_jitter_spread_hz))
            decoy_mult = float(nuisance_rng.uniform(1.0, spec.decoy_rate_spread))
            recordings = []
            for condition, duration in (("baseline", BASELINE_DURATION_S),
                                        ("stress", exp_duration)):
                rec_rng = derive(spec.seed, "subject", idx, condition)
                rec, latents = generate_recording(
                    spec, rec_rng, subject_id, label, condition, duration,
                    subject_jitter, decoy_mult)
                rel = f"{subject_id}/{condition}"
                save_recording(out_dir / rel, rec)
                save_latents(out_dir / rel, latents)
                recordings.append(rel)
            entries.append({"id": subject_id, "label": label, "recordings": recordings})
            idx += 1
    save_cohort_manifest(out_dir, entries)
    (out_dir / "synth_spec.json").write_text(
        json.dumps(spec.to_dict(), sort_keys=True, indent=2) + "\n")
    return out_dir


def noise_replace(window: WindowFeatures, stats: BandStats,
                  rng: np.random.Generator) -> WindowFeatures:
    """Replace all 19 spectrograms with band-matched i.i.d. noise.

    Change scores (and raw features) pass through untouched.
    """
    shape = window.mel.shape
    noise = stats.mean[None, :, None] + stats.std[None, :, None] * rng.standard_normal(shape)
    return WindowFeatures(
        subject_id=window.subject_id, label=window.label,
        window_index=window.window_index, mel=noise, change=window.change,
        raw_physio=window.raw_physio, raw_acoustic=window.raw_acoustic)
