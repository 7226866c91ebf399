"""Full classifier: extractor + bidirectional hyper-LSTM + head."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .. import checkpoint
from .. import tensor as T
from ..errors import CheckpointError, ConfigError, ContractError
from ..features import acoustic, melspec, windowing
from ..features.pipeline import WindowFeatures
from ..rng import derive
from ..tensor import Tensor
from .extractor import FeatureExtractor, FeatureExtractorConfig, ReferenceExtractor
from .hyperlstm import BidirectionalHyperLstm
from .layers import Linear, Net

N_CHANGE = 8
N_RAW_PHYSIO = 24


@dataclass(frozen=True)
class AblationFlags:
    no_nonlocal: bool = False
    aux_spectrogram_only: bool = False
    aux_changescore_only: bool = False
    noise_spectrogram: bool = False
    raw_physio: bool = False
    raw_acoustic_1d: bool = False

    def __post_init__(self):
        if self.aux_spectrogram_only and self.aux_changescore_only:
            raise ConfigError("at most one auxiliary-input ablation may be active")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class ModelConfig:
    """Architecture dimensions; defaults follow the finalized stress-task sizes."""

    embedding_dim: int = 533
    channels: int = 62
    conv_layers: int = 7
    nonlocal_blocks: int = 1
    ref_dim: int = 506
    n_aux: int = 234
    n_h: int = 915
    n_z: int = 487
    head_hidden: int = 915
    dropout: float = 0.2
    flags: AblationFlags = field(default_factory=AblationFlags)

    REF_RANGE = (200, 800)

    def __post_init__(self):
        # delegates range enforcement for the extractor fields
        FeatureExtractorConfig(
            nonlocal_blocks=self.nonlocal_blocks, conv_layers=self.conv_layers,
            channels=self.channels, embedding_dim=self.embedding_dim)
        lo, hi = self.REF_RANGE
        if not lo <= self.ref_dim <= hi:
            raise ConfigError(f"ref_dim={self.ref_dim} outside permitted range [{lo}, {hi}]")

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "flags"}
        out["flags"] = self.flags.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        flags = AblationFlags(**d.pop("flags", {}))
        return cls(flags=flags, **d)


class ClassifierHead(Net):
    """Three linear layers with relu and dropout; emits two logits."""

    def __init__(self, in_dim: int, hidden: int, rng, dropout_p: float):
        super().__init__()
        self.p = dropout_p
        self.l1 = self._add_child("l1", Linear(in_dim, hidden, rng))
        self.l2 = self._add_child("l2", Linear(hidden, hidden, rng))
        self.l3 = self._add_child("l3", Linear(hidden, 2, rng))

    def forward(self, x: Tensor, train: bool, rng) -> Tensor:
        y = T.dropout(T.relu(self.l1.forward(x)), self.p, rng, train)
        y = T.dropout(T.relu(self.l2.forward(y)), self.p, rng, train)
        return self.l3.forward(y)


class PasadModel:
    """End-to-end classifier over one 5 s window of 19 segments."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.flags = config.flags
        rng = derive(seed, "model-init")
        if config.flags.raw_acoustic_1d:
            speech_shape = (1, 1, acoustic.FEATURE_DIM)
        else:
            speech_shape = (1, melspec.N_MELS, melspec.N_FRAMES)
        self.speech_shape = speech_shape
        ref_in = N_RAW_PHYSIO if config.flags.raw_physio else N_CHANGE
        self.fx = FeatureExtractor(
            channels=config.channels, nonlocal_blocks=config.nonlocal_blocks,
            conv_layers=config.conv_layers, embedding_dim=config.embedding_dim,
            rng=rng, in_shape=speech_shape, no_nonlocal=config.flags.no_nonlocal)
        self.ref = ReferenceExtractor(ref_in, config.ref_dim, rng)
        if config.flags.aux_spectrogram_only:
            aux_in = config.embedding_dim
        elif config.flags.aux_changescore_only:
            aux_in = config.ref_dim
        else:
            aux_in = config.embedding_dim + config.ref_dim
        self.bi = BidirectionalHyperLstm(
            config.embedding_dim, aux_in, config.n_aux, config.n_h, config.n_z, rng)
        self.head = ClassifierHead(2 * config.n_h, config.head_hidden, rng, config.dropout)
        self.train_mode = False
        self.dropout_rng = derive(seed, "dropout")

    # -- mode -------------------------------------------------------------
    def train(self) -> "PasadModel":
        self.train_mode = True
        return self

    def eval(self) -> "PasadModel":
        self.train_mode = False
        return self

    # -- parameters ---------------------------------------------------------
    def named_params(self) -> dict[str, Tensor]:
        out = {}
        out.update(self.fx.named_params("fx."))
        out.update(self.ref.named_params("ref."))
        out.update(self.bi.named_params("hyper."))
        out.update(self.head.named_params("head."))
        return out

    def named_state(self) -> dict[str, np.ndarray]:
        out = {}
        out.update(self.fx.named_state("fx."))
        out.update(self.ref.named_state("ref."))
        out.update(self.bi.named_state("hyper."))
        out.update(self.head.named_state("head."))
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {k: t.data.copy() for k, t in self.named_params().items()}
        out.update({k: v.copy() for k, v in self.named_state().items()})
        return out

    def load_state_dict(self, values: dict[str, np.ndarray]) -> None:
        self.fx.load_state(values, "fx.")
        self.ref.load_state(values, "ref.")
        self.bi.load_state(values, "hyper.")
        self.head.load_state(values, "head.")

    def zero_grad(self) -> None:
        for t in self.named_params().values():
            t.zero_grad()

    # -- inputs -------------------------------------------------------------
    def speech_input(self, window: WindowFeatures) -> np.ndarray:
        if self.flags.raw_acoustic_1d:
            if window.raw_acoustic is None:
                raise ContractError("window lacks raw acoustic features required by this model")
            return window.raw_acoustic[:, None, None, :]
        return window.mel[:, None, :, :]

    def ref_input(self, window: WindowFeatures) -> np.ndarray:
        if self.flags.raw_physio:
            if window.raw_physio is None:
                raise ContractError("window lacks raw physio features required by this model")
            return window.raw_physio
        return window.change

    # -- forward --------------------------------------------------------------
    def embed(self, speech: np.ndarray, change: np.ndarray):
        """(19,1,H,W) speech and (19,D) reference input -> embedding Tensors."""
        s_emb = self.fx.forward(Tensor(speech), self.train_mode)      # (19, emb)
        p_emb = self.ref.forward(Tensor(change))                      # (19, ref)
        return s_emb, p_emb

    def aux_sequence(self, s_emb: Tensor, p_emb: Tensor) -> Tensor:
        if self.flags.aux_spectrogram_only:
            return s_emb
        if self.flags.aux_changescore_only:
            return p_emb
        return T.concat([s_emb, p_emb], axis=1)

    def forward_window(self, window: WindowFeatures, record_trace: bool = False):
        """Returns (logits, trace_fwd, trace_bwd) for one window."""
        if window.mel.shape[0] != windowing.N_SEGMENTS:
            raise ContractError(
                f"window has {window.mel.shape[0]} segments, expected {windowing.N_SEGMENTS}")
        s_emb, p_emb = self.embed(self.speech_input(window), self.ref_input(window))
        return self.forward_embedded(s_emb, p_emb, record_trace)

    def forward_embedded(self, s_emb: Tensor, p_emb: Tensor, record_trace: bool = False):
        aux = self.aux_sequence(s_emb, p_emb)
        h, trace_f, trace_b = self.bi.forward(s_emb, aux, record_trace)
        logits = self.head.forward(h, self.train_mode, self.dropout_rng)
        return logits, trace_f, trace_b

    def predict(self, window: WindowFeatures) -> int:
        logits, _, _ = self.forward_window(window)
        return int(np.argmax(logits.data))

    # -- serialization -----------------------------------------------------
    def save(self, path) -> None:
        arrays = self.state_dict()
        meta = self.config.to_dict()
        flags = meta.pop("flags")
        for key, value in meta.items():
            arrays[f"meta.{key}"] = np.asarray(float(value))
        for key, value in flags.items():
            arrays[f"meta.flag.{key}"] = np.asarray(1.0 if value else 0.0)
        checkpoint.save_arrays(path, arrays)

    @classmethod
    def load(cls, path) -> "PasadModel":
        arrays = checkpoint.load_arrays(path)
        meta = {}
        flag_values = {}
        for key in list(arrays):
            if key.startswith("meta.flag."):
                flag_values[key[len("meta.flag."):]] = bool(arrays.pop(key))
            elif key.startswith("meta."):
                meta[key[len("meta."):]] = arrays.pop(key)
        if not meta:
            raise CheckpointError(f"{path}: missing model metadata")
        config = ModelConfig(
            embedding_dim=int(meta["embedding_dim"]), channels=int(meta["channels"]),
            conv_layers=int(meta["conv_layers"]), nonlocal_blocks=int(meta["nonlocal_blocks"]),
            ref_dim=int(meta["ref_dim"]), n_aux=int(meta["n_aux"]), n_h=int(meta["n_h"]),
            n_z=int(meta["n_z"]), head_hidden=int(meta["head_hidden"]),
            dropout=float(meta["dropout"]), flags=AblationFlags(**flag_values))
        model = cls(config)
        model.load_state_dict(arrays)
        return model
