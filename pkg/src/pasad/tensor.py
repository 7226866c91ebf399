"""Dense float64 tensors with reverse-mode differentiation.

The tape is define-by-run: operations executed while a ``Tape`` is active
append themselves in execution order, which is already a topological
order, and ``backward`` walks the records in reverse.  With no tape
active, operations run plain numpy with no recording overhead, which is
the evaluation path.

Gradient arrays are never mutated in place once assigned: accumulation
always rebinds (``t.grad = t.grad + g``), so backward rules are free to
return views or aliases of upstream gradients.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .errors import (
    ConfigError,
    ContractError,
    DoubleBackwardError,
    NonFiniteError,
    ShapeError,
)

_ACTIVE_TAPES: list["Tape"] = []
_DEBUG_CHECKS = False


def set_debug(enabled: bool) -> None:
    """Toggle per-operation finiteness checks (slow; for tests)."""
    global _DEBUG_CHECKS
    _DEBUG_CHECKS = bool(enabled)


class Tensor:
    """A dense float64 array, optionally tracked for gradients."""

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False, name=self.name)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # operator sugar; scalars and ndarrays are promoted to constants
    def __add__(self, other):
        return add(self, _ensure(other))

    def __radd__(self, other):
        return add(_ensure(other), self)

    def __sub__(self, other):
        return sub(self, _ensure(other))

    def __rsub__(self, other):
        return sub(_ensure(other), self)

    def __mul__(self, other):
        return mul(self, _ensure(other))

    def __rmul__(self, other):
        return mul(_ensure(other), self)

    def __truediv__(self, other):
        return div(self, _ensure(other))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _ensure(other))


def _ensure(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Record:
    __slots__ = ("op", "inputs", "output", "backward_rule")

    def __init__(self, op, inputs, output, backward_rule):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward_rule = backward_rule


class Tape:
    """Execution-ordered record of differentiable operations."""

    def __init__(self):
        self._records: list[_Record] = []
        self._spent = False

    def __enter__(self) -> "Tape":
        _ACTIVE_TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _ACTIVE_TAPES.pop()
        if popped is not self:
            raise RuntimeError("tape stack corrupted: nested tapes exited out of order")

    @property
    def n_ops(self) -> int:
        return len(self._records)

    def first_nonfinite(self) -> str | None:
        """Name of the earliest recorded op with a non-finite output, if any."""
        for rec in self._records:
            if not np.all(np.isfinite(rec.output.data)):
                return rec.op
        return None


def _finish(op: str, inputs: tuple[Tensor, ...], out_data: np.ndarray, backward_rule) -> Tensor:
    if _DEBUG_CHECKS and not np.all(np.isfinite(out_data)):
        raise NonFiniteError(f"non-finite values produced by op '{op}'")
    track = bool(_ACTIVE_TAPES) and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=track)
    if track:
        _ACTIVE_TAPES[-1]._records.append(_Record(op, inputs, out, backward_rule))
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate .grad of every requires_grad tensor reachable from loss.

    The tape may be consumed only once; a second call raises, because the
    grads of the leaves would silently double.
    """
    if loss.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.shape}")
    if tape._spent:
        raise DoubleBackwardError("tape already used; rebuild the graph before calling backward again")
    tape._spent = True
    loss.grad = np.ones_like(loss.data)
    for rec in reversed(tape._records):
        g_out = rec.output.grad
        if g_out is None:
            continue
        grads = rec.backward_rule(g_out)
        for tensor, g in zip(rec.inputs, grads):
            if g is None or not tensor.requires_grad:
                continue
            tensor.grad = g if tensor.grad is None else tensor.grad + g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def rule(g):
        return (_unbroadcast(g, a.data.shape) if a.requires_grad else None,
                _unbroadcast(g, b.data.shape) if b.requires_grad else None)

    return _finish("add", (a, b), out, rule)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def rule(g):
        return (_unbroadcast(g, a.data.shape) if a.requires_grad else None,
                _unbroadcast(-g, b.data.shape) if b.requires_grad else None)

    return _finish("sub", (a, b), out, rule)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def rule(g):
        return (_unbroadcast(g * b.data, a.data.shape) if a.requires_grad else None,
                _unbroadcast(g * a.data, b.data.shape) if b.requires_grad else None)

    return _finish("mul", (a, b), out, rule)


def div(a: Tensor, b: Tensor) -> Tensor:
    out = a.data / b.data

    def rule(g):
        return (_unbroadcast(g / b.data, a.data.shape) if a.requires_grad else None,
                _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape) if b.requires_grad else None)

    return _finish("div", (a, b), out, rule)


def neg(a: Tensor) -> Tensor:
    return _finish("neg", (a,), -a.data, lambda g: (-g,))


# ---------------------------------------------------------------------------
# reductions and shape plumbing
# ---------------------------------------------------------------------------

def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def rule(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape),)

    return _finish("sum", (a,), out, rule)


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else np.prod([a.data.shape[ax] for ax in np.atleast_1d(axis)])

    def rule(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape) / count,)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape) / count,)

    return _finish("mean", (a,), out, rule)


def reshape(a: Tensor, shape) -> Tensor:
    src_shape = a.data.shape
    out = a.data.reshape(shape)
    return _finish("reshape", (a,), out, lambda g: (g.reshape(src_shape),))


def flatten(a: Tensor) -> Tensor:
    return reshape(a, (-1,))


def transpose(a: Tensor, axes=None) -> Tensor:
    out = a.data.transpose(axes)
    if axes is None:
        inv = None
    else:
        inv = tuple(np.argsort(axes))
    return _finish("transpose", (a,), out, lambda g: (g.transpose(inv),))


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = tuple(tensors)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def rule(g):
        return tuple(np.split(g, splits, axis=axis))

    return _finish("concat", tensors, out, rule)


def take_row(a: Tensor, index: int) -> Tensor:
    """Select row `index` along axis 0 (used to unstack sequences)."""
    out = a.data[index]

    def rule(g):
        full = np.zeros_like(a.data)
        full[index] = g
        return (full,)

    return _finish("take_row", (a,), out, rule)


def flip_rows(a: Tensor) -> Tensor:
    """Reverse along axis 0 (time reversal for the backward direction)."""
    out = a.data[::-1].copy()
    return _finish("flip_rows", (a,), out, lambda g: (g[::-1].copy(),))


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def sigmoid(a: Tensor) -> Tensor:
    out = expit(a.data)
    return _finish("sigmoid", (a,), out, lambda g: (g * out * (1.0 - out),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _finish("tanh", (a,), out, lambda g: (g * (1.0 - out * out),))


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)
    return _finish("relu", (a,), out, lambda g: (g * (a.data > 0.0),))


def texp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _finish("exp", (a,), out, lambda g: (g * out,))


def tlog(a: Tensor) -> Tensor:
    out = np.log(a.data)
    return _finish("log", (a,), out, lambda g: (g / a.data,))


def tsqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _finish("sqrt", (a,), out, lambda g: (g * 0.5 / out,))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Max-shifted softmax; stable for arbitrarily large finite inputs.

    Attention maps make this the hottest op, so the forward works
    in-place on one buffer and the backward reduces with einsum rather
    than materializing a second full-size temporary.
    """
    out = a.data - a.data.max(axis=axis, keepdims=True)
    np.exp(out, out=out)
    out /= out.sum(axis=axis, keepdims=True)

    def rule(g):
        if axis in (-1, a.data.ndim - 1):
            dot = np.einsum("...i,...i->...", g, out)[..., None]
        else:
            dot = (g * out).sum(axis=axis, keepdims=True)
        gx = g - dot
        gx *= out
        return (gx,)

    return _finish("softmax", (a,), out, rule)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize a vector to zero mean, unit variance, then apply gain/bias."""
    if x.ndim != 1:
        raise ShapeError(f"layer_norm expects a vector, got shape {x.shape}")
    mu = x.data.mean()
    var = x.data.var()
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = gain.data * xhat + bias.data

    def rule(g):
        gx = None
        if x.requires_grad:
            gh = g * gain.data
            n = x.data.size
            gx = inv * (gh - gh.mean() - xhat * (gh * xhat).sum() / n)
        gg = (g * xhat) if gain.requires_grad else None
        gb = g if bias.requires_grad else None
        return (gx, gg, gb)

    return _finish("layer_norm", (x, gain, bias), out, rule)


def dropout(a: Tensor, p: float, rng: np.random.Generator, train: bool) -> Tensor:
    """Inverted dropout: train-mode mask scaled by 1/(1-p); eval is identity."""
    if not train or p <= 0.0:
        return _finish("dropout_eval", (a,), a.data, lambda g: (g,))
    keep = (rng.random(a.data.shape) >= p) / (1.0 - p)
    out = a.data * keep
    return _finish("dropout", (a,), out, lambda g: (g * keep,))


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with matvec/vecmat and stacked-batch support.

    Supported: (m,k)@(k,n), (m,k)@(k,), (k,)@(k,n), and (...,m,k)@(...,k,n)
    with broadcastable leading dims.  Backward: dA = dC.B^T, dB = A^T.dC.
    """
    ad, bd = a.data, b.data
    if ad.ndim == 0 or bd.ndim == 0:
        raise ShapeError("matmul requires at least 1-d operands")
    if ad.shape[-1] != (bd.shape[-2] if bd.ndim >= 2 else bd.shape[0]):
        raise ShapeError(f"matmul inner dimensions disagree: {ad.shape} x {bd.shape}")
    try:
        # np.dot dispatches matrix-vector products to BLAS gemv, which
        # np.matmul does not; the recurrent path lives on gemv calls.
        if ad.ndim <= 2 and bd.ndim <= 2:
            out = np.dot(ad, bd)
        else:
            out = np.matmul(ad, bd)
    except ValueError as e:  # mismatched batch dims
        raise ShapeError(f"matmul shapes incompatible: {ad.shape} x {bd.shape}") from e

    def rule(g):
        ga = gb = None
        if a.requires_grad:
            if ad.ndim == 1:         # (k,)@(k,n): dA = dC . B^T = B @ g
                ga = bd @ g
            elif bd.ndim == 1:       # (m,k)@(k,): dA = outer(g, b)
                ga = np.multiply.outer(g, bd)
            else:
                ga = _unbroadcast(np.matmul(g, bd.swapaxes(-1, -2)), ad.shape)
        if b.requires_grad:
            if bd.ndim == 1:         # dB = A^T . dC
                gb = ad.T @ g if ad.ndim == 2 else np.multiply.outer(ad, g) if ad.ndim == 1 else None
                if ad.ndim > 2:
                    raise ShapeError("matmul batched-matrix @ vector backward not supported")
            elif ad.ndim == 1:       # dB = outer(a, g)
                gb = np.multiply.outer(ad, g)
            else:
                gb = _unbroadcast(np.matmul(ad.swapaxes(-1, -2), g), bd.shape)
        return (ga, gb)

    return _finish("matmul", (a, b), out, rule)


def _conv_geometry(h, w, kh, kw, stride, pad_h, pad_w):
    oh = (h + 2 * pad_h - kh) // stride + 1
    ow = (w + 2 * pad_w - kw) // stride + 1
    return oh, ow


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    """(N,C,Hp,Wp) -> (N, C*kh*kw, oh*ow) by kh*kw shifted slices."""
    n, c, _, _ = xp.shape
    col = np.empty((n, c, kh, kw, oh, ow), dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            col[:, :, i, j] = xp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride]
    return col.reshape(n, c * kh * kw, oh * ow)


def _col2im(gcol: np.ndarray, xp_shape, kh: int, kw: int, stride: int, oh: int, ow: int) -> np.ndarray:
    """Adjoint of _im2col: scatter-add the shifted slices back."""
    n, c, hp, wp = xp_shape
    g6 = gcol.reshape(n, c, kh, kw, oh, ow)
    gxp = np.zeros(xp_shape, dtype=np.float64)
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride] += g6[:, :, i, j]
    return gxp


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding=None) -> Tensor:
    """2-d cross-correlation with optional bias.

    x: (C,H,W) or (N,C,H,W); kernels: (C_out,C_in,kh,kw) with kh,kw in {1,3}.
    padding defaults to "same" for size-3 axes (1) and 0 for size-1 axes,
    so the spatial dims are preserved at stride 1.
    """
    kd = kernels.data
    if kd.ndim != 4:
        raise ShapeError(f"kernels must be (C_out,C_in,kh,kw), got {kd.shape}")
    c_out, c_in, kh, kw = kd.shape
    if kh not in (1, 3) or kw not in (1, 3):
        raise ContractError(f"kernel sizes limited to 1 or 3, got {kh}x{kw}")
    squeeze = x.data.ndim == 3
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 4:
        raise ShapeError(f"input must be (C,H,W) or (N,C,H,W), got {x.shape}")
    n, c, h, w = xd.shape
    if c != c_in:
        raise ShapeError(f"input channels {c} do not match kernel channels {c_in}")
    if padding is None:
        pad_h, pad_w = (kh - 1) // 2, (kw - 1) // 2
    elif isinstance(padding, tuple):
        pad_h, pad_w = padding
    else:
        pad_h = pad_w = int(padding)
    oh, ow = _conv_geometry(h, w, kh, kw, stride, pad_h, pad_w)
    if oh <= 0 or ow <= 0:
        raise ConfigError(
            f"conv2d output would be empty: input {h}x{w}, kernel {kh}x{kw}, "
            f"stride {stride}, padding ({pad_h},{pad_w})"
        )

    pointwise = kh == 1 and kw == 1 and stride == 1 and not (pad_h or pad_w)
    xp = np.pad(xd, ((0, 0), (0, 0), (pad_h, pad_h), (pad_w, pad_w))) if (pad_h or pad_w) else xd
    if pointwise:  # 1x1 convolution: the column matrix is just a reshape
        col = xd.reshape(n, c, h * w)
    else:
        col = _im2col(xp, kh, kw, stride, oh, ow)          # (N, K, L)
    w2 = kd.reshape(c_out, c_in * kh * kw)                 # (C_out, K)
    out = np.matmul(w2, col)                               # (N, C_out, L)
    if bias is not None:
        out = out + bias.data[None, :, None]
    out = out.reshape(n, c_out, oh, ow)
    if squeeze:
        out = out[0]

    inputs = (x, kernels) if bias is None else (x, kernels, bias)

    def rule(g):
        g4 = g[None] if squeeze else g
        gflat = g4.reshape(n, c_out, oh * ow)
        gx = gk = gb = None
        if kernels.requires_grad:
            gk = np.matmul(gflat, col.transpose(0, 2, 1)).sum(axis=0).reshape(kd.shape)
        if x.requires_grad:
            gcol = np.matmul(w2.T, gflat)                  # (N, K, L)
            if pointwise:
                gx = gcol.reshape(n, c, h, w)
            else:
                gxp = _col2im(gcol, xp.shape, kh, kw, stride, oh, ow)
                gx = gxp[:, :, pad_h:pad_h + h, pad_w:pad_w + w]
            if squeeze:
                gx = gx[0]
        if bias is not None and bias.requires_grad:
            gb = gflat.sum(axis=(0, 2))
        return (gx, gk) if bias is None else (gx, gk, gb)

    return _finish("conv2d", inputs, out, rule)


def cross_entropy_with_logits(logits: Tensor, target: int) -> Tensor:
    """Scalar negative log-likelihood of class `target` under softmax(logits)."""
    z = logits.data
    if z.ndim != 1:
        raise ShapeError(f"logits must be a vector, got shape {z.shape}")
    if not 0 <= int(target) < z.size:
        raise ContractError(f"target {target} out of range for {z.size} classes")
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    out = np.asarray(lse - z[int(target)])
    probs = np.exp(z - lse)

    def rule(g):
        gz = probs.copy()
        gz[int(target)] -= 1.0
        return (gz * g,)

    return _finish("cross_entropy", (logits,), out, rule)
