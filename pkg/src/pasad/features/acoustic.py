"""Raw acoustic descriptors of a 500 ms audio segment.

Low-level descriptors are computed per STFT frame (10 frames, shared
framing with the mel pipeline):

  * 13 cepstral coefficients (DCT-II of the absolute log-mel energies)
  * zero-crossing rate of the raw frame
  * fundamental frequency from the normalized autocorrelation peak in
    the 75-600 Hz range, with a 0.3 voicing threshold (0 when unvoiced)
  * first four resonance frequencies from order-12 linear prediction
    (autocorrelation method), keeping roots with bandwidth under 400 Hz

First-order deltas (two-point slope across frames, one-sided at the
edges) double the channel count, and the six HLD functionals summarize
each channel over the segment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct
from scipy.linalg import solve_toeplitz

from . import melspec
from .physio import hld

N_MFCC = 13
LPC_ORDER = 12  # sampling kHz + 2 rule of thumb at 10 kHz
F0_MIN = 75.0
F0_MAX = 600.0
VOICING_THRESHOLD = 0.3
MAX_FORMANT_BW = 400.0
N_FORMANTS = 4

LLD_NAMES = tuple(f"mfcc{i}" for i in range(N_MFCC)) + ("zcr", "f0", "f1", "f2", "f3", "f4")
FEATURE_DIM = 2 * len(LLD_NAMES) * len(hld(np.zeros(2)))  # 38 channels x 6 functionals


def mfcc(samples: np.ndarray) -> np.ndarray:
    """First 13 cepstral coefficients per frame, shape (N_FRAMES, 13)."""
    logmel = melspec.log_mel_frames(samples)
    return dct(logmel, type=2, norm="ortho", axis=1)[:, :N_MFCC]


def zero_crossing_rate(frame: np.ndarray) -> float:
    """Fraction of adjacent sample pairs with a strict sign change."""
    return float(np.mean(frame[:-1] * frame[1:] < 0.0))


def estimate_f0(frame: np.ndarray, sr: int = melspec.SAMPLE_RATE) -> tuple[float, bool]:
    """(f0_hz, voiced). Unvoiced frames report 0 Hz.

    Normalized autocorrelation with parabolic peak interpolation; the
    peak is searched between sr/F0_MAX and sr/F0_MIN lags.
    """
    x = frame - frame.mean()
    n = x.size
    spec = np.fft.rfft(x, 2 * n)
    r = np.fft.irfft(spec.real ** 2 + spec.imag ** 2)[:n]
    if r[0] <= 0.0:
        return 0.0, False
    r = r / r[0]
    lag_min = int(np.ceil(sr / F0_MAX))
    lag_max = int(np.floor(sr / F0_MIN))
    seg = r[lag_min:lag_max + 1]
    k = int(np.argmax(seg)) + lag_min
    if r[k] < VOICING_THRESHOLD:
        return 0.0, False
    # parabolic refinement around the integer-lag peak
    if 1 <= k < n - 1:
        denom = r[k - 1] - 2.0 * r[k] + r[k + 1]
        shift = 0.5 * (r[k - 1] - r[k + 1]) / denom if denom != 0.0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
    else:
        shift = 0.0
    return sr / (k + shift), True


def lpc_coefficients(frame: np.ndarray, order: int = LPC_ORDER) -> np.ndarray | None:
    """Prediction polynomial [1, a1..a_order] via the autocorrelation method."""
    w = frame * melspec.hann_periodic(frame.size)
    n = w.size
    spec = np.fft.rfft(w, 2 * n)
    r = np.fft.irfft(spec.real ** 2 + spec.imag ** 2)[:order + 1]
    if r[0] <= 0.0:
        return None
    try:
        a = solve_toeplitz((r[:-1], r[:-1]), -r[1:])
    except np.linalg.LinAlgError:
        return None
    return np.concatenate([[1.0], a])


def estimate_formants(frame: np.ndarray, sr: int = melspec.SAMPLE_RATE) -> tuple[np.ndarray, bool]:
    """First four resonances in Hz, ascending; zeros padded when missing.

    Returns (formants[4], complete_flag).
    """
    poly = lpc_coefficients(frame)
    if poly is None or not np.all(np.isfinite(poly)):
        return np.zeros(N_FORMANTS), False
    roots = np.roots(poly)
    roots = roots[roots.imag > 0.0]
    freqs = np.angle(roots) * sr / (2.0 * np.pi)
    mags = np.abs(roots)
    with np.errstate(divide="ignore"):
        bandwidths = -np.log(np.maximum(mags, 1e-12)) * sr / np.pi
    keep = (bandwidths < MAX_FORMANT_BW) & (freqs > 50.0) & (freqs < sr / 2 - 50.0)
    found = np.sort(freqs[keep])[:N_FORMANTS]
    out = np.zeros(N_FORMANTS)
    out[:found.size] = found
    return out, found.size >= N_FORMANTS


def deltas(lld: np.ndarray) -> np.ndarray:
    """Two-point slope along the frame axis, one-sided at the edges."""
    d = np.empty_like(lld)
    d[1:-1] = (lld[2:] - lld[:-2]) / 2.0
    d[0] = lld[1] - lld[0]
    d[-1] = lld[-1] - lld[-2]
    return d


@dataclass
class RawAcousticFeatures:
    lld: np.ndarray            # (N_FRAMES, 19) in LLD_NAMES order
    features: np.ndarray       # (FEATURE_DIM,) HLDs of LLDs then of deltas
    voiced: np.ndarray         # (N_FRAMES,) bool
    formants_complete: np.ndarray  # (N_FRAMES,) bool


def raw_acoustic(samples: np.ndarray) -> RawAcousticFeatures:
    frames = melspec.frame_segment(samples)
    ceps = mfcc(samples)
    n = frames.shape[0]
    lld = np.zeros((n, len(LLD_NAMES)), dtype=np.float64)
    voiced = np.zeros(n, dtype=bool)
    complete = np.zeros(n, dtype=bool)
    lld[:, :N_MFCC] = ceps
    for i, frame in enumerate(frames):
        lld[i, N_MFCC] = zero_crossing_rate(frame)
        f0, v = estimate_f0(frame)
        lld[i, N_MFCC + 1] = f0
        voiced[i] = v
        formants, ok = estimate_formants(frame)
        lld[i, N_MFCC + 2:] = formants
        complete[i] = ok
    stacked = np.concatenate([lld, deltas(lld)], axis=1)   # (N_FRAMES, 38)
    feats = np.concatenate([hld(stacked[:, j]) for j in range(stacked.shape[1])])
    return RawAcousticFeatures(lld=lld, features=feats, voiced=voiced, formants_complete=complete)
