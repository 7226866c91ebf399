"""Spectrogram embedding extractor and change-score reference extractor.

The extractor lifts the single-channel spectrogram to `channels` maps
with a 1x1 convolution, applies `nonlocal_blocks` repetitions of
(non-local block -> 3x3 conv + batch-norm + relu), then `conv_layers`
further 3x3 conv + batch-norm + relu stages, flattens, and projects to
the embedding size with one relu linear layer.  The two counts are
independent, so the total number of convolution stages is
nonlocal_blocks + conv_layers (+ the lift).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..errors import ConfigError
from ..tensor import Tensor
from .layers import ConvBnRelu, Linear, Net
from .nonlocal_block import NonLocalBlock


@dataclass(frozen=True)
class FeatureExtractorConfig:
    nonlocal_blocks: int
    conv_layers: int
    channels: int
    embedding_dim: int

    RANGES = {
        "nonlocal_blocks": (1, 4),
        "conv_layers": (5, 12),
        "channels": (8, 128),
        "embedding_dim": (200, 800),
    }

    def __post_init__(self):
        for field_name, (lo, hi) in self.RANGES.items():
            value = getattr(self, field_name)
            if not (isinstance(value, (int, np.integer)) and lo <= value <= hi):
                raise ConfigError(f"{field_name}={value!r} outside permitted range [{lo}, {hi}]")

    def build(self, rng: np.random.Generator, in_shape=(1, 64, 10),
              no_nonlocal: bool = False) -> "FeatureExtractor":
        return FeatureExtractor(
            channels=self.channels, nonlocal_blocks=self.nonlocal_blocks,
            conv_layers=self.conv_layers, embedding_dim=self.embedding_dim,
            rng=rng, in_shape=in_shape, no_nonlocal=no_nonlocal,
        )


class FeatureExtractor(Net):
    """Constructor takes raw dimensions; range policy lives in the config."""

    def __init__(self, channels: int, nonlocal_blocks: int, conv_layers: int,
                 embedding_dim: int, rng: np.random.Generator,
                 in_shape=(1, 64, 10), no_nonlocal: bool = False):
        super().__init__()
        in_ch, h, w = in_shape
        kernel = (3, 3) if h > 1 else (1, 3)
        self.in_shape = tuple(in_shape)
        self.embedding_dim = embedding_dim
        self.lift = self._add_child("lift", ConvBnRelu(in_ch, channels, (1, 1), rng))
        self.stages: list[tuple[str, Net]] = []
        for i in range(nonlocal_blocks):
            if no_nonlocal:
                mixer = ConvBnRelu(channels, channels, kernel, rng)
            else:
                mixer = NonLocalBlock(channels, rng)
            self._add_child(f"nl{i}", mixer)
            conv = self._add_child(f"nlconv{i}", ConvBnRelu(channels, channels, kernel, rng))
            self.stages.append(("nl", mixer))
            self.stages.append(("conv", conv))
        for i in range(conv_layers):
            conv = self._add_child(f"conv{i}", ConvBnRelu(channels, channels, kernel, rng))
            self.stages.append(("conv", conv))
        flat = channels * h * w
        self.project = self._add_child("project", Linear(flat, embedding_dim, rng))

    def forward(self, x: Tensor, train: bool) -> Tensor:
        """(N, C_in, H, W) -> (N, embedding_dim); also accepts one sample."""
        squeeze = x.ndim == 3
        if squeeze:
            x = T.reshape(x, (1,) + x.shape)
        y = self.lift.forward(x, train)
        for kind, stage in self.stages:
            if kind == "nl" and isinstance(stage, NonLocalBlock):
                y = stage.forward(y)
            else:
                y = stage.forward(y, train)
        flat = T.reshape(y, (y.shape[0], -1))
        emb = T.relu(self.project.forward(flat))
        return T.reshape(emb, (self.embedding_dim,)) if squeeze else emb


class ReferenceExtractor(Net):
    """Two relu linear layers embedding the physiological change scores."""

    def __init__(self, in_dim: int, ref_dim: int, rng: np.random.Generator):
        super().__init__()
        self.ref_dim = ref_dim
        self.l1 = self._add_child("l1", Linear(in_dim, ref_dim, rng))
        self.l2 = self._add_child("l2", Linear(ref_dim, ref_dim, rng))

    def forward(self, x: Tensor) -> Tensor:
        return T.relu(self.l2.forward(T.relu(self.l1.forward(x))))
