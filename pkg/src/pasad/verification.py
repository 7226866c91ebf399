"""The finite-difference verification suite behind `pasad grad-check`.

Each differentiable operation is checked against central differences at
1e-4; the miniature end-to-end model (hidden size 4, three timesteps,
all parameters) is checked at 1e-3.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .gradcheck import check_gradients, check_gradients_inplace
from .nets.extractor import FeatureExtractor, ReferenceExtractor
from .nets.hyperlstm import BidirectionalHyperLstm
from .nets.model import ClassifierHead
from .rng import derive
from .tensor import Tensor

ELEMENT_TOL = 1e-4
MODEL_TOL = 1e-3


@dataclass
class CheckResult:
    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def line(self) -> str:
        status = "ok" if self.passed else "FAIL"
        return f"[{status}] {self.name}: max rel err {self.max_error:.3e} (tol {self.tolerance:.0e})"


def _op_checks(seed: int) -> list[CheckResult]:
    rng = derive(seed, "gradcheck-ops")
    results = []

    def check(name, fn, x, tol=ELEMENT_TOL):
        results.append(CheckResult(name, check_gradients(fn, Tensor(x)), tol))

    # all random constants are drawn once; the probes re-run many times
    v = rng.standard_normal(7)
    m = rng.standard_normal((4, 5))
    other = Tensor(rng.standard_normal(7))
    m2 = Tensor(rng.standard_normal((5, 3)))
    w54 = Tensor(rng.standard_normal((5, 4)))
    w45 = Tensor(rng.standard_normal((5, 4)))
    w14 = Tensor(rng.standard_normal(14))
    w5 = Tensor(rng.standard_normal(5))
    w7a = Tensor(rng.standard_normal(7))
    w7b = Tensor(rng.standard_normal(7))
    mat37 = Tensor(rng.standard_normal((3, 7)))
    gain = Tensor(rng.standard_normal(7))
    zbias = Tensor(np.zeros(7))

    check("add", lambda x: T.tsum(x + other), v)
    check("sub", lambda x: T.tsum(x - other), v)
    check("mul", lambda x: T.tsum(x * other), v)
    check("div", lambda x: T.tsum(x / (other * other + Tensor(1.0))), v)
    check("neg", lambda x: T.tsum(-x), v)
    check("sum_axis", lambda x: T.tsum(T.tsum(x, axis=0) * Tensor(np.arange(5.0))), m)
    check("mean", lambda x: T.tmean(x) * Tensor(3.0), m)
    check("reshape", lambda x: T.tsum(T.reshape(x, (5, 4)) * w54), m)
    check("transpose", lambda x: T.tsum(T.transpose(x) * w45), m)
    check("concat", lambda x: T.tsum(T.concat([x, x * Tensor(2.0)]) * w14), v)
    check("take_row", lambda x: T.tsum(T.take_row(x, 2) * w5), m)
    check("sigmoid", lambda x: T.tsum(T.sigmoid(x)), v)
    check("tanh", lambda x: T.tsum(T.tanh(x)), v)
    check("relu", lambda x: T.tsum(T.relu(x)), v + 0.05)  # keep off the kink
    check("exp", lambda x: T.tsum(T.texp(x)), v * 0.5)
    check("log", lambda x: T.tsum(T.tlog(x)), np.abs(v) + 0.5)
    check("sqrt", lambda x: T.tsum(T.tsqrt(x)), np.abs(v) + 0.5)
    check("softmax", lambda x: T.tsum(T.softmax(x, axis=-1) * w7a), v)
    check("layer_norm", lambda x: T.tsum(T.layer_norm(x, gain, zbias) * w7b), v)
    check("matmul_mat", lambda x: T.tsum(T.matmul(x, m2)), m)
    check("matmul_vec", lambda x: T.tsum(T.matmul(mat37, x)), v)
    check("cross_entropy", lambda x: T.cross_entropy_with_logits(x, 1), rng.standard_normal(4))

    def fixed_dropout(x):
        return T.tsum(T.dropout(x, 0.4, derive(seed, "dropmask"), train=True))

    check("dropout_train", fixed_dropout, v)

    img = rng.standard_normal((2, 5, 6))
    k3 = Tensor(rng.standard_normal((3, 2, 3, 3)) * 0.4)
    b3 = Tensor(rng.standard_normal(3))
    check("conv2d_input", lambda x: T.tsum(T.conv2d(x, k3, b3)), img)
    results.append(CheckResult(
        "conv2d_kernels",
        check_gradients(lambda k: T.tsum(T.conv2d(Tensor(img), k, b3)), Tensor(k3.data.copy())),
        ELEMENT_TOL))
    k1 = Tensor(rng.standard_normal((2, 2, 1, 1)))
    check("conv2d_1x1", lambda x: T.tsum(T.conv2d(x, k1)), img)
    img77 = Tensor(rng.standard_normal((1, 7, 7)))
    results.append(CheckResult(
        "conv2d_stride2",
        check_gradients(lambda k: T.tsum(T.conv2d(img77, k, stride=2)),
                        Tensor(rng.standard_normal((2, 1, 3, 3)))),
        ELEMENT_TOL))
    check("matmul_sigmoid_sum", lambda x: T.tsum(T.sigmoid(T.matmul(mat37, x))), v)
    return results


def build_miniature(seed: int = 0, dropout: float = 0.0):
    """Tiny end-to-end model: embedding 6, hidden 4, aux 3, z 3."""
    rng = derive(seed, "miniature")
    fx = FeatureExtractor(channels=2, nonlocal_blocks=1, conv_layers=1,
                          embedding_dim=6, rng=rng, in_shape=(1, 6, 4))
    ref = ReferenceExtractor(8, 5, rng)
    bi = BidirectionalHyperLstm(emb_dim=6, aux_in_dim=11, n_aux=3, n_h=4, n_z=3, rng=rng)
    head = ClassifierHead(8, 5, rng, dropout_p=dropout)
    return fx, ref, bi, head


def miniature_loss_fn(seed: int = 0, timesteps: int = 3):
    """Returns (loss_fn, params) for the miniature model on fixed data."""
    fx, ref, bi, head = build_miniature(seed)
    data_rng = derive(seed, "miniature-data")
    speech = data_rng.standard_normal((timesteps, 1, 6, 4))
    change = data_rng.standard_normal((timesteps, 8))

    def loss_fn():
        s_emb = fx.forward(Tensor(speech), train=True)
        p_emb = ref.forward(Tensor(change))
        aux = T.concat([s_emb, p_emb], axis=1)
        h, _, _ = bi.forward(s_emb, aux)
        logits = head.forward(h, train=False, rng=None)
        return T.cross_entropy_with_logits(logits, 0)

    params = {}
    params.update(fx.named_params("fx."))
    params.update(ref.named_params("ref."))
    params.update(bi.named_params("hyper."))
    params.update(head.named_params("head."))
    return loss_fn, params


def miniature_model_check(seed: int = 0, timesteps: int = 3) -> CheckResult:
    loss_fn, params = miniature_loss_fn(seed, timesteps)
    err = check_gradients_inplace(loss_fn, params)
    return CheckResult(f"miniature_model_{timesteps}step", err, MODEL_TOL)


def run_gradient_suite(seed: int = 0) -> list[CheckResult]:
    results = _op_checks(seed)
    results.append(miniature_model_check(seed))
    return results
