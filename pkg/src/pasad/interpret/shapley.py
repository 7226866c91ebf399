"""Two-stage frozen-gate Kernel SHAP over frequency-band tokens.

Stage one runs the full model once on the unperturbed window and records
the realized gate weights of both recurrence directions.  Stage two
treats the extractor + main recurrence + head (with those weights fixed)
as a black box over the spectrogram alone: the auxiliary network never
re-executes, so attribution flows only through the speech path.

The 64 mel bands are grouped into 32 two-band tokens spanning all 19
segments and 10 frames.  Masked tokens take background pixels.  Sampled
coalitions are scored with the Shapley kernel

    pi(s) = (M - 1) / (C(M, s) * s * (M - s))

and a weighted least squares with the efficiency constraint pinned
(sum of attributions = f(x) - f(background)) yields the per-band values.
When the budget covers all 2^M - 2 interior coalitions the estimate is
exact, which the enumeration oracle exploits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ContractError
from ..features import melspec, windowing
from ..features.pipeline import WindowFeatures
from ..nets.hyperlstm import GateWeights
from ..nets.model import PasadModel
from ..rng import derive
from ..tensor import Tensor, concat, flip_rows

N_BANDS_DEFAULT = 32


@dataclass(frozen=True)
class ShapConfig:
    band_count: int = N_BANDS_DEFAULT
    coalition_samples: int = 2048
    background: str = "dataset_mean"      # or "zeros"
    seed: int = 0

    def __post_init__(self):
        if melspec.N_MELS % self.band_count != 0:
            raise ConfigError(
                f"band_count {self.band_count} must divide {melspec.N_MELS} mel bands")
        if self.background not in ("dataset_mean", "zeros"):
            raise ConfigError(f"unknown background policy {self.background!r}")
        if self.coalition_samples < 2:
            raise ConfigError("need at least 2 coalition samples")


@dataclass
class FrozenForward:
    """Model parameters plus recorded gate weights for one window."""

    model: PasadModel
    window: WindowFeatures
    trace_fwd: list[GateWeights]
    trace_bwd: list[GateWeights]
    original_logits: np.ndarray
    predicted_class: int

    def evaluate(self, mel: np.ndarray) -> np.ndarray:
        """Logits for a perturbed spectrogram stack under frozen gates."""
        model = self.model
        model.eval()
        s_emb = model.fx.forward(Tensor(mel[:, None, :, :]), train=False)
        h_f = model.bi.fwd.run_frozen(s_emb, self.trace_fwd)
        h_b = model.bi.bwd.run_frozen(flip_rows(s_emb), self.trace_bwd)
        h = concat([h_f, h_b])
        logits = model.head.forward(h, train=False, rng=None)
        return logits.data

    def explained_value(self, mel: np.ndarray) -> float:
        return float(self.evaluate(mel)[self.predicted_class])


def freeze(model: PasadModel, window: WindowFeatures) -> FrozenForward:
    """Run the full model once and capture the per-timestep gate weights."""
    if model.flags.raw_acoustic_1d:
        raise ContractError("frequency-band attribution requires the spectrogram model")
    model.eval()
    logits, trace_f, trace_b = model.forward_window(window, record_trace=True)
    return FrozenForward(
        model=model, window=window, trace_fwd=trace_f, trace_bwd=trace_b,
        original_logits=logits.data.copy(), predicted_class=int(np.argmax(logits.data)))


def band_rows(band: int, band_count: int = N_BANDS_DEFAULT) -> slice:
    per = melspec.N_MELS // band_count
    return slice(band * per, (band + 1) * per)


def mask_bands(mel: np.ndarray, coalition: np.ndarray, background: np.ndarray) -> np.ndarray:
    """Keep bands where coalition is true; replace the rest with background."""
    out = mel.copy()
    m = coalition.size
    for b in range(m):
        if not coalition[b]:
            rows = band_rows(b, m)
            out[:, rows, :] = background[:, rows, :]
    return out


def band_edges_hz(band_count: int = N_BANDS_DEFAULT) -> np.ndarray:
    """Contiguous nominal Hz boundaries for the band tokens, length M+1."""
    pts = melspec.MEL_POINTS_HZ
    per = melspec.N_MELS // band_count
    edges = pts[0:melspec.N_MELS + 1:per].copy()
    edges[-1] = pts[-1]
    return edges


def shapley_kernel(m: int, s: int) -> float:
    if s <= 0 or s >= m:
        raise ContractError("kernel weight undefined for empty/full coalitions")
    return (m - 1) / (math.comb(m, s) * s * (m - s))


def _sample_coalitions(m: int, budget: int, rng: np.random.Generator):
    """Coalition rows and regression weights.

    Fully enumerates coalition sizes (paired s, m-s) while the budget
    allows, with exact kernel weights; any leftover budget is sampled
    from the remaining sizes proportional to their total kernel mass,
    each sampled row carrying an equal share of that mass.
    """
    rows: list[np.ndarray] = []
    weights: list[float] = []
    remaining = budget
    sizes = list(range(1, m))
    enumerated: set[int] = set()
    order: list[int] = []
    lo, hi = 1, m - 1
    while lo <= hi:
        order.append(lo)
        if hi != lo:
            order.append(hi)
        lo += 1
        hi -= 1
    for s in order:
        count = math.comb(m, s)
        if count > remaining:
            break
        for bits in _subsets(m, s):
            rows.append(bits)
            weights.append(shapley_kernel(m, s))
        enumerated.add(s)
        remaining -= count
    leftover_sizes = [s for s in sizes if s not in enumerated]
    if leftover_sizes and remaining > 0:
        mass = np.array([shapley_kernel(m, s) * math.comb(m, s) for s in leftover_sizes])
        probs = mass / mass.sum()
        share = float(mass.sum()) / remaining
        for _ in range(remaining):
            s = int(rng.choice(leftover_sizes, p=probs))
            picks = rng.choice(m, size=s, replace=False)
            bits = np.zeros(m, dtype=bool)
            bits[picks] = True
            rows.append(bits)
            weights.append(share)
    return np.array(rows, dtype=bool), np.array(weights)


def _subsets(m: int, s: int):
    """All size-s subsets of range(m) as boolean rows (lexicographic)."""
    import itertools
    for combo in itertools.combinations(range(m), s):
        bits = np.zeros(m, dtype=bool)
        bits[list(combo)] = True
        yield bits


def kernel_shap_values(value_fn, m: int, n_samples: int,
                       rng: np.random.Generator, max_retries: int = 3):
    """Constrained weighted least squares over sampled coalitions.

    value_fn maps a boolean coalition vector to a scalar.  Returns
    (phi, base_value, full_value).  The full and empty coalitions are
    always evaluated: the empty one pins the base value and the
    efficiency constraint pins the sum of attributions.
    """
    v_full = float(value_fn(np.ones(m, dtype=bool)))
    v_empty = float(value_fn(np.zeros(m, dtype=bool)))
    delta = v_full - v_empty

    for attempt in range(max_retries):
        z, w = _sample_coalitions(m, n_samples, rng)
        y = np.array([value_fn(row) for row in z]) - v_empty
        zw = z.astype(np.float64) * w[:, None]
        a = np.zeros((m + 1, m + 1))
        a[:m, :m] = 2.0 * zw.T @ z
        a[:m, m] = 1.0
        a[m, :m] = 1.0
        b = np.zeros(m + 1)
        b[:m] = 2.0 * zw.T @ y
        b[m] = delta
        try:
            solution = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(solution)):
            return solution[:m], v_empty, v_full
    raise ContractError(
        f"singular Shapley regression system after {max_retries} resampling attempts")


def exact_shapley(scorer, x: np.ndarray, background: np.ndarray,
                  max_features: int = 16) -> np.ndarray:
    """Classical Shapley values by full 2^M enumeration (the oracle).

    scorer maps a feature vector to a scalar; masked coordinates take
    background values.
    """
    m = int(np.asarray(x).shape[0])
    if m > max_features:
        raise ContractError(f"exact enumeration refused for M={m} > {max_features}")
    x = np.asarray(x, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    values = np.empty(2 ** m)
    for mask in range(2 ** m):
        probe = background.copy()
        for b in range(m):
            if mask >> b & 1:
                probe[b] = x[b]
        values[mask] = scorer(probe)
    fact = [math.factorial(k) for k in range(m + 1)]
    phi = np.zeros(m)
    for b in range(m):
        for mask in range(2 ** m):
            if mask >> b & 1:
                continue
            s = bin(mask).count("1")
            weight = fact[s] * fact[m - s - 1] / fact[m]
            phi[b] += weight * (values[mask | (1 << b)] - values[mask])
    return phi


@dataclass
class ShapleyReport:
    subject_id: str
    window_index: int
    values: np.ndarray            # (band_count,)
    base_value: float
    model_output: float
    predicted_class: int
    band_edges: np.ndarray        # (band_count+1,) Hz
    coalition_samples: int
    seed: int
    background: str = "dataset_mean"
    extras: dict = field(default_factory=dict)

    @property
    def efficiency_gap(self) -> float:
        return abs(float(self.values.sum()) - (self.model_output - self.base_value))


def kernel_shap(frozen: FrozenForward, config: ShapConfig,
                background: np.ndarray) -> ShapleyReport:
    """Attribute the predicted-class logit to frequency-band tokens."""
    window = frozen.window
    if window.mel.shape[0] != windowing.N_SEGMENTS:
        raise ContractError("frozen window has the wrong segment count")
    rng = derive(config.seed, "coalitions", window.subject_id, window.window_index)

    def value_fn(coalition: np.ndarray) -> float:
        return frozen.explained_value(mask_bands(window.mel, coalition, background))

    phi, base, full = kernel_shap_values(
        value_fn, config.band_count, config.coalition_samples, rng)
    return ShapleyReport(
        subject_id=window.subject_id, window_index=window.window_index,
        values=phi, base_value=base, model_output=full,
        predicted_class=frozen.predicted_class,
        band_edges=band_edges_hz(config.band_count),
        coalition_samples=config.coalition_samples, seed=config.seed,
        background=config.background)


def make_background(policy: str, stats_pixel_mean: np.ndarray | None) -> np.ndarray:
    shape = (windowing.N_SEGMENTS, melspec.N_MELS, melspec.N_FRAMES)
    if policy == "zeros":
        return np.zeros(shape)
    if stats_pixel_mean is None:
        raise ContractError("dataset_mean background needs dataset statistics")
    if stats_pixel_mean.shape != shape:
        raise ContractError(f"background has shape {stats_pixel_mean.shape}, expected {shape}")
    return stats_pixel_mean
