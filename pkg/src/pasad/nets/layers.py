"""Parameter-bearing building blocks.

Every net exposes ``named_params`` (trainable tensors) and
``named_state`` (non-trainable arrays such as batch-norm running
statistics), keyed by dotted paths so the whole model serializes through
the flat parameter container.
"""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..tensor import Tensor


class Net:
    """Minimal container: children and own parameters, walked recursively."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._state: dict[str, np.ndarray] = {}
        self._children: dict[str, "Net"] = {}

    def _add_param(self, name: str, value: np.ndarray) -> Tensor:
        t = Tensor(value, requires_grad=True, name=name)
        self._params[name] = t
        return t

    def _add_child(self, name: str, child: "Net") -> "Net":
        self._children[name] = child
        return child

    def named_params(self, prefix: str = "") -> dict[str, Tensor]:
        out = {}
        for name, t in self._params.items():
            out[f"{prefix}{name}"] = t
        for cname, child in self._children.items():
            out.update(child.named_params(f"{prefix}{cname}."))
        return out

    def named_state(self, prefix: str = "") -> dict[str, np.ndarray]:
        out = {}
        for name, arr in self._state.items():
            out[f"{prefix}{name}"] = arr
        for cname, child in self._children.items():
            out.update(child.named_state(f"{prefix}{cname}."))
        return out

    def load_state(self, values: dict[str, np.ndarray], prefix: str = "") -> None:
        for name, t in self._params.items():
            key = f"{prefix}{name}"
            t.data = np.asarray(values[key], dtype=np.float64).reshape(t.data.shape)
        for name in list(self._state):
            key = f"{prefix}{name}"
            self._state[name] = np.asarray(values[key], dtype=np.float64).reshape(self._state[name].shape)
        for cname, child in self._children.items():
            child.load_state(values, f"{prefix}{cname}.")


def orthogonal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, _ = np.linalg.qr(a)
    q = q[:rows, :cols] if rows >= cols else q[:cols, :rows].T
    return np.ascontiguousarray(q)


class Linear(Net):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator,
                 w_std: float | None = None, b_init: float = 0.0):
        super().__init__()
        std = w_std if w_std is not None else np.sqrt(2.0 / in_dim)
        self.w = self._add_param("W", rng.standard_normal((out_dim, in_dim)) * std)
        self.b = self._add_param("b", np.full(out_dim, float(b_init)))

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim == 1:
            return T.matmul(self.w, x) + self.b
        return T.matmul(x, T.transpose(self.w)) + self.b


class Conv2d(Net):
    def __init__(self, in_ch: int, out_ch: int, kernel: tuple[int, int],
                 rng: np.random.Generator, stride: int = 1):
        super().__init__()
        kh, kw = kernel
        fan_in = in_ch * kh * kw
        self.kernel = self._add_param(
            "W", rng.standard_normal((out_ch, in_ch, kh, kw)) * np.sqrt(2.0 / fan_in))
        self.bias = self._add_param("b", np.zeros(out_ch))
        self.stride = stride

    def forward(self, x: Tensor) -> Tensor:
        return T.conv2d(x, self.kernel, self.bias, stride=self.stride)


class BatchNorm2d(Net):
    """Channel-wise normalization; running statistics frozen in eval mode."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.gamma = self._add_param("gamma", np.ones(channels))
        self.beta = self._add_param("beta", np.zeros(channels))
        self._state["running_mean"] = np.zeros(channels)
        self._state["running_var"] = np.ones(channels)
        self.momentum = momentum
        self.eps = eps

    def forward(self, x: Tensor, train: bool) -> Tensor:
        axes = (0, 2, 3)
        if train:
            mu = T.tmean(x, axis=axes, keepdims=True)
            centered = x - mu
            var = T.tmean(centered * centered, axis=axes, keepdims=True)
            xhat = centered / T.tsqrt(var + Tensor(self.eps))
            m = self.momentum
            self._state["running_mean"] = (1 - m) * self._state["running_mean"] + m * mu.data.reshape(-1)
            self._state["running_var"] = (1 - m) * self._state["running_var"] + m * var.data.reshape(-1)
        else:
            mu = self._state["running_mean"].reshape(1, -1, 1, 1)
            inv = 1.0 / np.sqrt(self._state["running_var"].reshape(1, -1, 1, 1) + self.eps)
            xhat = (x - Tensor(mu)) * Tensor(inv)
        g = T.reshape(self.gamma, (1, -1, 1, 1))
        b = T.reshape(self.beta, (1, -1, 1, 1))
        return g * xhat + b


class ConvBnRelu(Net):
    def __init__(self, in_ch: int, out_ch: int, kernel: tuple[int, int], rng):
        super().__init__()
        self.conv = self._add_child("conv", Conv2d(in_ch, out_ch, kernel, rng))
        self.bn = self._add_child("bn", BatchNorm2d(out_ch))

    def forward(self, x: Tensor, train: bool) -> Tensor:
        return T.relu(self.bn.forward(self.conv.forward(x), train))
