"""Non-local block: every position attends to every other position.

For input x of shape (C, H, W), three 1x1 convolutions embed the map
into a C/2-channel bottleneck (theta, phi, g).  Pairwise scores
exp(theta_i . phi_j), normalized over j, weight the g embeddings; a
final 1x1 convolution restores C channels and a residual connection
adds the input back, so output shape always equals input shape.
"""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..errors import ConfigError
from ..tensor import Tensor
from .layers import Conv2d, Net


class NonLocalBlock(Net):
    def __init__(self, channels: int, rng: np.random.Generator):
        super().__init__()
        if channels < 2:
            raise ConfigError("non-local block needs at least 2 channels for its bottleneck")
        inner = channels // 2
        self.channels = channels
        self.inner = inner
        self.theta = self._add_child("theta", Conv2d(channels, inner, (1, 1), rng))
        self.phi = self._add_child("phi", Conv2d(channels, inner, (1, 1), rng))
        self.g = self._add_child("g", Conv2d(channels, inner, (1, 1), rng))
        self.out = self._add_child("out", Conv2d(inner, channels, (1, 1), rng))

    def attention(self, x: Tensor) -> Tensor:
        """Row-stochastic (L, L) attention per sample; rows sum to 1."""
        squeeze = x.ndim == 3
        x4 = T.reshape(x, (1,) + x.shape) if squeeze else x
        n, c, h, w = x4.shape
        L = h * w
        th = T.reshape(self.theta.forward(x4), (n, self.inner, L))
        ph = T.reshape(self.phi.forward(x4), (n, self.inner, L))
        scores = T.matmul(T.transpose(th, (0, 2, 1)), ph)     # (n, L, L)
        att = T.softmax(scores, axis=-1)
        return T.reshape(att, (L, L)) if squeeze else att

    def forward(self, x: Tensor) -> Tensor:
        squeeze = x.ndim == 3
        x4 = T.reshape(x, (1,) + x.shape) if squeeze else x
        n, c, h, w = x4.shape
        L = h * w
        th = T.reshape(self.theta.forward(x4), (n, self.inner, L))
        ph = T.reshape(self.phi.forward(x4), (n, self.inner, L))
        gg = T.reshape(self.g.forward(x4), (n, self.inner, L))
        scores = T.matmul(T.transpose(th, (0, 2, 1)), ph)     # (n, L, L)
        att = T.softmax(scores, axis=-1)
        mixed = T.matmul(att, T.transpose(gg, (0, 2, 1)))     # (n, L, inner)
        mixed = T.reshape(T.transpose(mixed, (0, 2, 1)), (n, self.inner, h, w))
        y = self.out.forward(mixed) + x4
        return T.reshape(y, x.shape) if squeeze else y
