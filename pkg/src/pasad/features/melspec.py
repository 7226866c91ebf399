"""Mel spectrograms of 500 ms audio segments.

Fixed pipeline: 5000 samples at 10 kHz, reflect-padded by nfft/2 on both
sides, periodic Hann window, FFT length 2048, hop 512 -> 10 frames.  The
power spectrum goes through a 64-filter triangular bank on the HTK mel
scale spanning 0-5000 Hz (peak-1 triangles, no area normalization).

Two output flavors share the linear mel power core:
  * ``mel_spectrogram`` - dB relative to the segment maximum, floored at
    -80 dB; this is the model input and the rendered heatmap.
  * ``log_mel_frames`` - absolute dB per frame (no floor relative to the
    max), which the cepstral features need so that a gain change moves
    only the zeroth cepstral coefficient.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError

SAMPLE_RATE = 10000
SEGMENT_SAMPLES = 5000
NFFT = 2048
HOP = 512
N_MELS = 64
FMIN = 0.0
FMAX = 5000.0
N_FRAMES = 1 + SEGMENT_SAMPLES // HOP  # 10
DB_FLOOR = -80.0
_AMIN = 1e-10


def hann_periodic(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


_WINDOW = hann_periodic(NFFT)


def frame_segment(samples: np.ndarray) -> np.ndarray:
    """Reflect-pad and slice into (N_FRAMES, NFFT) raw (unwindowed) frames."""
    x = np.asarray(samples, dtype=np.float64)
    if x.shape != (SEGMENT_SAMPLES,):
        raise ContractError(f"expected {SEGMENT_SAMPLES} samples, got shape {x.shape}")
    pad = NFFT // 2
    xp = np.pad(x, pad, mode="reflect")
    frames = np.empty((N_FRAMES, NFFT), dtype=np.float64)
    for i in range(N_FRAMES):
        frames[i] = xp[i * HOP:i * HOP + NFFT]
    return frames


def power_frames(samples: np.ndarray) -> np.ndarray:
    """Windowed one-sided power spectrum, shape (N_FRAMES, NFFT//2+1)."""
    frames = frame_segment(samples) * _WINDOW
    spec = np.fft.rfft(frames, axis=1)
    return (spec.real ** 2 + spec.imag ** 2)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_points_hz(n_mels: int = N_MELS, fmin: float = FMIN, fmax: float = FMAX) -> np.ndarray:
    """The n_mels+2 mel-equidistant edge/center frequencies in Hz."""
    return mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))


def mel_filterbank(n_mels: int = N_MELS, nfft: int = NFFT, sr: int = SAMPLE_RATE,
                   fmin: float = FMIN, fmax: float = FMAX):
    """Triangular filter matrix (n_mels, nfft//2+1) and its Hz anchor points."""
    pts = mel_points_hz(n_mels, fmin, fmax)
    bins_hz = np.arange(nfft // 2 + 1) * (sr / nfft)
    bank = np.zeros((n_mels, bins_hz.size), dtype=np.float64)
    for m in range(n_mels):
        lo, center, hi = pts[m], pts[m + 1], pts[m + 2]
        up = (bins_hz - lo) / (center - lo)
        down = (hi - bins_hz) / (hi - center)
        bank[m] = np.clip(np.minimum(up, down), 0.0, None)
    return bank, pts


_BANK, MEL_POINTS_HZ = mel_filterbank()
BAND_CENTERS_HZ = MEL_POINTS_HZ[1:-1]


def mel_power(samples: np.ndarray) -> np.ndarray:
    """Linear mel-band power, shape (N_MELS, N_FRAMES)."""
    return _BANK @ power_frames(samples).T


def mel_spectrogram(samples: np.ndarray) -> np.ndarray:
    """Mel energies in dB relative to the segment maximum, floored at -80.

    Silence maps to a constant -80 plane.
    """
    p = mel_power(samples)
    ref = p.max()
    if ref <= 0.0:
        return np.full_like(p, DB_FLOOR)
    return 10.0 * np.log10(np.maximum(p / ref, 10.0 ** (DB_FLOOR / 10.0)))


def log_mel_frames(samples: np.ndarray) -> np.ndarray:
    """Absolute log-mel energies per frame, shape (N_FRAMES, N_MELS)."""
    return 10.0 * np.log10(np.maximum(mel_power(samples).T, _AMIN))
