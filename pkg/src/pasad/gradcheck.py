"""Finite-difference verification of backward rules.

``check_gradients`` compares the taped gradient of a scalar-valued tensor
function against central differences, coordinate by coordinate.  The
reported figure is

    max_i |analytic_i - numeric_i| / max(1, |analytic_i|)

so it behaves like an absolute error near zero and a relative error for
large gradients.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .errors import ContractError
from .tensor import Tape, Tensor, backward


def _analytic_grad(f: Callable[[Tensor], Tensor], x: Tensor) -> np.ndarray:
    probe = Tensor(x.data.copy(), requires_grad=True)
    with Tape() as tape:
        out = f(probe)
    if not isinstance(out, Tensor) or out.size != 1:
        raise ContractError("check_gradients requires a scalar-valued function")
    backward(out, tape)
    return probe.grad if probe.grad is not None else np.zeros_like(probe.data)


def _numeric_grad(f: Callable[[Tensor], Tensor], x: Tensor, eps: float) -> np.ndarray:
    flat = x.data.copy().reshape(-1)
    num = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(Tensor(flat.reshape(x.data.shape))).item()
        flat[i] = orig - eps
        lo = f(Tensor(flat.reshape(x.data.shape))).item()
        flat[i] = orig
        num[i] = (hi - lo) / (2.0 * eps)
    return num.reshape(x.data.shape)


def check_gradients(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-4) -> float:
    """Max scaled deviation between taped and central-difference gradients."""
    analytic = _analytic_grad(f, x)
    numeric = _numeric_grad(f, x, eps)
    scale = np.maximum(1.0, np.abs(analytic))
    return float((np.abs(analytic - numeric) / scale).max())


def check_gradients_inplace(loss_fn, params: Mapping[str, Tensor],
                            eps: float = 1e-4) -> float:
    """FD check over live parameter tensors by in-place perturbation.

    loss_fn() must rebuild the forward pass from the current parameter
    values (taped on the first call, plain re-evaluations afterwards).
    Restores parameter values and clears their grads before returning.
    """
    for t in params.values():
        t.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    if loss.size != 1:
        raise ContractError("check_gradients_inplace requires a scalar loss")
    backward(loss, tape)

    worst = 0.0
    for name, t in params.items():
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        aflat = analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = loss_fn().item()
            flat[i] = orig - eps
            lo = loss_fn().item()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * eps)
            worst = max(worst, abs(aflat[i] - numeric) / max(1.0, abs(aflat[i])))
    for t in params.values():
        t.zero_grad()
    return worst


def check_gradients_multi(
    f: Callable[[Mapping[str, Tensor]], Tensor],
    params: Mapping[str, np.ndarray],
    eps: float = 1e-4,
) -> float:
    """Like check_gradients, but over a dict of named parameter arrays.

    `f` receives freshly wrapped Tensors each call, so it must read the
    parameters it is given rather than closing over its own.
    """
    tracked = {k: Tensor(v.copy(), requires_grad=True, name=k) for k, v in params.items()}
    with Tape() as tape:
        out = f(tracked)
    if out.size != 1:
        raise ContractError("check_gradients_multi requires a scalar-valued function")
    backward(out, tape)

    worst = 0.0
    for key in params:
        base = {k: t.data for k, t in tracked.items()}
        analytic = tracked[key].grad
        if analytic is None:
            analytic = np.zeros_like(params[key])
        flat = base[key].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = f({k: Tensor(v) for k, v in base.items()}).item()
            flat[i] = orig - eps
            lo = f({k: Tensor(v) for k, v in base.items()}).item()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * eps)
            a = analytic.reshape(-1)[i]
            worst = max(worst, abs(a - numeric) / max(1.0, abs(a)))
    return worst
