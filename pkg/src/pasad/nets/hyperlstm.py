"""Hyper-LSTM: an auxiliary LSTM regenerates the main LSTM's gate weights
at every timestep.

At each step the auxiliary cell consumes the concatenated spectrogram and
change-score embeddings and emits a hidden state.  Per gate, three linear
maps turn that hidden state into small embedding vectors; two further
linear maps turn those into row-scaling vectors d, and the realized gate
weight matrix is diag(d) . W_base.  Matrix-vector products with realized
weights are evaluated as d * (W_base @ v), which is algebraically the
same without ever materializing the scaled matrix; the trace records the
scaling vectors so realized matrices can be materialized on demand.

The main recurrence consumes only the spectrogram embedding:

    c_t = sigmoid(f) * c_{t-1} + sigmoid(i) * tanh(g)
    h_t = sigmoid(o) * tanh(LN(c_t))

with layer normalization on the cell state.  A constructor flag can
disable the normalization, which reduces the cell to a standard LSTM
whenever all scaling vectors are 1 (used by the equivalence tests and
the plain-LSTM ablation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..errors import ContractError
from ..tensor import Tensor
from .layers import Linear, Net, orthogonal

GATES = ("i", "g", "f", "o")


class LstmCell(Net):
    """Standard LSTM cell (the auxiliary network)."""

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.hidden = hidden
        for gate in GATES:
            self._add_param(f"Wx_{gate}", rng.standard_normal((hidden, in_dim)) / np.sqrt(in_dim))
            self._add_param(f"Wh_{gate}", orthogonal(rng, hidden, hidden))
            self._add_param(f"b_{gate}", np.full(hidden, 1.0 if gate == "f" else 0.0))

    def init_state(self) -> tuple[Tensor, Tensor]:
        z = np.zeros(self.hidden)
        return Tensor(z), Tensor(z.copy())

    def step(self, x: Tensor, state: tuple[Tensor, Tensor]) -> tuple[Tensor, Tensor]:
        h, c = state
        pre = {
            gate: T.matmul(self._params[f"Wx_{gate}"], x)
            + T.matmul(self._params[f"Wh_{gate}"], h)
            + self._params[f"b_{gate}"]
            for gate in GATES
        }
        c_new = T.sigmoid(pre["f"]) * c + T.sigmoid(pre["i"]) * T.tanh(pre["g"])
        h_new = T.sigmoid(pre["o"]) * T.tanh(c_new)
        return h_new, c_new


class GateGenerator(Net):
    """Per-gate projections from the auxiliary hidden state.

    z_h, z_x, z_b are linear images of the auxiliary state; d_h and d_x
    scale the rows of the base matrices; the realized bias is
    W_bz @ z_b + b0.  Scaling projections start near d = 1 (bias 1,
    weights sized for ~0.3 relative modulation at unit z) so training
    begins close to a standard LSTM while leaving the conditioning
    pathway enough gain to be shaped within a short optimization budget.
    """

    SCALE_INIT = 0.3  # d(z) modulation magnitude at unit z

    def __init__(self, n_aux: int, n_z: int, n_h: int, rng: np.random.Generator,
                 forget_bias: float = 0.0):
        super().__init__()
        d_std = self.SCALE_INIT / np.sqrt(n_z)
        self.z_h = self._add_child("z_h", Linear(n_aux, n_z, rng, w_std=1.0 / np.sqrt(n_aux)))
        self.z_x = self._add_child("z_x", Linear(n_aux, n_z, rng, w_std=1.0 / np.sqrt(n_aux)))
        self.z_b = self._add_child("z_b", Linear(n_aux, n_z, rng, w_std=1.0 / np.sqrt(n_aux)))
        self.d_h = self._add_child("d_h", Linear(n_z, n_h, rng, w_std=d_std, b_init=1.0))
        self.d_x = self._add_child("d_x", Linear(n_z, n_h, rng, w_std=d_std, b_init=1.0))
        self.w_bz = self._add_param("W_bz", rng.standard_normal((n_h, n_z)) * d_std)
        self.b0 = self._add_param("b0", np.full(n_h, forget_bias))

    def generate(self, h_aux: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        """Returns (d_h, d_x, bias) for one gate at one timestep."""
        dh = self.d_h.forward(self.z_h.forward(h_aux))
        dx = self.d_x.forward(self.z_x.forward(h_aux))
        bias = T.matmul(self.w_bz, self.z_b.forward(h_aux)) + self.b0
        return dh, dx, bias

    def fix_unit_scaling(self) -> None:
        """Pin d(z) = 1 and bias = b0 exactly (degenerate standard-LSTM mode)."""
        for proj in (self.d_h, self.d_x):
            proj.w.data = np.zeros_like(proj.w.data)
            proj.b.data = np.ones_like(proj.b.data)
        self.w_bz.data = np.zeros_like(self.w_bz.data)


@dataclass
class BaseWeights:
    """Shared base matrices whose rows the generator rescales."""

    w_h: dict[str, Tensor]   # gate -> (N_h, N_h)
    w_x: dict[str, Tensor]   # gate -> (N_h, D_emb)

    def row_norms_sq(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        return {
            gate: ((self.w_h[gate].data ** 2).sum(axis=1),
                   (self.w_x[gate].data ** 2).sum(axis=1))
            for gate in GATES
        }


@dataclass
class GateTensors:
    """Realized per-timestep gate parameters on the autodiff graph."""

    scale_h: dict[str, Tensor]
    scale_x: dict[str, Tensor]
    bias: dict[str, Tensor]


@dataclass
class GateWeights:
    """Detached record of one timestep's realized gate weights.

    Realized matrices are diag(scale) . base and are materialized lazily;
    norms and distances use the row-scaling identity
    ||diag(d) W - diag(d') W||_F^2 = sum_i (d_i - d'_i)^2 ||W_i||^2
    so full matrices are never formed for large models.
    """

    scale_h: dict[str, np.ndarray]
    scale_x: dict[str, np.ndarray]
    bias: dict[str, np.ndarray]
    base: BaseWeights

    @classmethod
    def from_tensors(cls, gt: GateTensors, base: BaseWeights) -> "GateWeights":
        return cls(
            scale_h={g: gt.scale_h[g].data.copy() for g in GATES},
            scale_x={g: gt.scale_x[g].data.copy() for g in GATES},
            bias={g: gt.bias[g].data.copy() for g in GATES},
            base=base,
        )

    def as_tensors(self) -> GateTensors:
        return GateTensors(
            scale_h={g: Tensor(self.scale_h[g]) for g in GATES},
            scale_x={g: Tensor(self.scale_x[g]) for g in GATES},
            bias={g: Tensor(self.bias[g]) for g in GATES},
        )

    def w_h(self, gate: str) -> np.ndarray:
        return self.scale_h[gate][:, None] * self.base.w_h[gate].data

    def w_x(self, gate: str) -> np.ndarray:
        return self.scale_x[gate][:, None] * self.base.w_x[gate].data

    def frobenius_delta(self, other: "GateWeights") -> float:
        total = 0.0
        norms = self.base.row_norms_sq()
        for gate in GATES:
            nh, nx = norms[gate]
            total += (((self.scale_h[gate] - other.scale_h[gate]) ** 2) * nh).sum()
            total += (((self.scale_x[gate] - other.scale_x[gate]) ** 2) * nx).sum()
            total += ((self.bias[gate] - other.bias[gate]) ** 2).sum()
        return float(np.sqrt(total))

    def gate_norm(self, gate: str) -> float:
        nh, nx = self.base.row_norms_sq()[gate]
        total = ((self.scale_h[gate] ** 2) * nh).sum()
        total += ((self.scale_x[gate] ** 2) * nx).sum()
        total += (self.bias[gate] ** 2).sum()
        return float(np.sqrt(total))


def gate_weight_change(trace: list[GateWeights]) -> np.ndarray:
    """Per-timestep distance between consecutive realized gate weights.

    Index 0 is defined as 0; entry t >= 1 is the Frobenius distance
    between the concatenated gate matrices (and biases) at t and t-1.
    """
    out = np.zeros(len(trace))
    for t in range(1, len(trace)):
        out[t] = trace[t].frobenius_delta(trace[t - 1])
    return out


def main_step_projected(x_proj: dict[str, Tensor], gates: GateTensors,
                        base: BaseWeights, state: tuple[Tensor, Tensor],
                        ln_gain: Tensor, ln_bias: Tensor,
                        use_layer_norm: bool = True) -> tuple[Tensor, Tensor]:
    """One main-LSTM step, input projections W_x @ s precomputed per gate.

    Shared by the live path (gates fresh from the generators) and the
    frozen interpretation path (gates replayed from a trace); both paths
    therefore produce bit-identical activations for identical inputs.
    """
    h, c = state
    pre = {}
    for gate in GATES:
        pre[gate] = (gates.scale_h[gate] * T.matmul(base.w_h[gate], h)
                     + gates.scale_x[gate] * x_proj[gate]
                     + gates.bias[gate])
    c_new = T.sigmoid(pre["f"]) * c + T.sigmoid(pre["i"]) * T.tanh(pre["g"])
    pre_h = T.layer_norm(c_new, ln_gain, ln_bias) if use_layer_norm else c_new
    h_new = T.sigmoid(pre["o"]) * T.tanh(pre_h)
    return h_new, c_new


def main_step(s_emb: Tensor, gates: GateTensors, base: BaseWeights,
              state: tuple[Tensor, Tensor], ln_gain: Tensor, ln_bias: Tensor,
              use_layer_norm: bool = True) -> tuple[Tensor, Tensor]:
    """Single-step form: projects the input then advances the recurrence."""
    x_proj = {gate: T.matmul(base.w_x[gate], s_emb) for gate in GATES}
    return main_step_projected(x_proj, gates, base, state, ln_gain, ln_bias,
                               use_layer_norm)


class HyperLstmDirection(Net):
    """One direction: auxiliary cell, four gate generators, main recurrence."""

    def __init__(self, emb_dim: int, aux_in_dim: int, n_aux: int, n_h: int, n_z: int,
                 rng: np.random.Generator, use_layer_norm: bool = True):
        super().__init__()
        self.n_h = n_h
        self.use_layer_norm = use_layer_norm
        self.aux = self._add_child("aux", LstmCell(aux_in_dim, n_aux, rng))
        self.generators = {
            gate: self._add_child(
                f"gen_{gate}",
                GateGenerator(n_aux, n_z, n_h, rng, forget_bias=1.0 if gate == "f" else 0.0))
            for gate in GATES
        }
        w_h = {g: self._add_param(f"Wh_{g}", orthogonal(rng, n_h, n_h) * 0.1) for g in GATES}
        w_x = {g: self._add_param(f"Wx_{g}", orthogonal(rng, n_h, emb_dim) * 0.1) for g in GATES}
        self.base = BaseWeights(w_h=w_h, w_x=w_x)
        self.ln_gain = self._add_param("ln_gain", np.ones(n_h))
        self.ln_bias = self._add_param("ln_bias", np.zeros(n_h))

    def init_state(self):
        z = np.zeros(self.n_h)
        return (Tensor(z), Tensor(z.copy())), self.aux.init_state()

    def generate_gates(self, h_aux: Tensor) -> GateTensors:
        dh, dx, bias = {}, {}, {}
        for gate in GATES:
            dh[gate], dx[gate], bias[gate] = self.generators[gate].generate(h_aux)
        return GateTensors(scale_h=dh, scale_x=dx, bias=bias)

    def step(self, s_emb: Tensor, aux_in: Tensor, main_state, aux_state):
        aux_state = self.aux.step(aux_in, aux_state)
        gates = self.generate_gates(aux_state[0])
        main_state = main_step(
            s_emb, gates, self.base, main_state,
            self.ln_gain, self.ln_bias, self.use_layer_norm)
        return main_state, aux_state, gates

    def _aux_hidden_matrix(self, aux_mat: Tensor) -> Tensor:
        aux_state = self.aux.init_state()
        rows = []
        for t in range(aux_mat.shape[0]):
            aux_state = self.aux.step(T.take_row(aux_mat, t), aux_state)
            rows.append(T.reshape(aux_state[0], (1, -1)))
        return T.concat(rows, axis=0)

    def _batched_gates(self, h_mat: Tensor) -> dict[str, tuple[Tensor, Tensor, Tensor]]:
        """All timesteps' (d_h, d_x, bias) rows per gate in one pass.

        The generator weight matrices stream through matrix-matrix
        products once per window instead of once per timestep; the
        recurrence itself stays sequential.
        """
        out = {}
        for gate in GATES:
            gen = self.generators[gate]
            d_h = gen.d_h.forward(gen.z_h.forward(h_mat))
            d_x = gen.d_x.forward(gen.z_x.forward(h_mat))
            bias = T.matmul(gen.z_b.forward(h_mat), T.transpose(gen.w_bz)) + gen.b0
            out[gate] = (d_h, d_x, bias)
        return out

    def _input_projections(self, s_mat: Tensor) -> dict[str, Tensor]:
        return {g: T.matmul(s_mat, T.transpose(self.base.w_x[g])) for g in GATES}

    def run(self, s_mat: Tensor, aux_mat: Tensor, record_trace: bool = False):
        """Consume aligned (T, emb) and (T, aux_in) matrices; final h + trace."""
        if s_mat.shape[0] != aux_mat.shape[0]:
            raise ContractError("speech and auxiliary sequences must have equal length")
        steps = s_mat.shape[0]
        h_mat = self._aux_hidden_matrix(aux_mat)
        gates_all = self._batched_gates(h_mat)
        x_proj = self._input_projections(s_mat)
        main_state, _ = self.init_state()
        trace: list[GateWeights] = []
        for t in range(steps):
            gates = GateTensors(
                scale_h={g: T.take_row(gates_all[g][0], t) for g in GATES},
                scale_x={g: T.take_row(gates_all[g][1], t) for g in GATES},
                bias={g: T.take_row(gates_all[g][2], t) for g in GATES})
            xp = {g: T.take_row(x_proj[g], t) for g in GATES}
            main_state = main_step_projected(
                xp, gates, self.base, main_state,
                self.ln_gain, self.ln_bias, self.use_layer_norm)
            if record_trace:
                trace.append(GateWeights.from_tensors(gates, self.base))
        return main_state[0], trace

    def run_frozen(self, s_mat: Tensor, trace: list[GateWeights]) -> Tensor:
        """Replay recorded gate weights over a (possibly perturbed) sequence."""
        if s_mat.shape[0] != len(trace):
            raise ContractError("frozen trace length does not match the sequence")
        x_proj = self._input_projections(s_mat)
        main_state, _ = self.init_state()
        for t, rec in enumerate(trace):
            xp = {g: T.take_row(x_proj[g], t) for g in GATES}
            main_state = main_step_projected(
                xp, rec.as_tensors(), self.base, main_state,
                self.ln_gain, self.ln_bias, self.use_layer_norm)
        return main_state[0]


class BidirectionalHyperLstm(Net):
    def __init__(self, emb_dim: int, aux_in_dim: int, n_aux: int, n_h: int, n_z: int,
                 rng: np.random.Generator, use_layer_norm: bool = True):
        super().__init__()
        self.fwd = self._add_child("fwd", HyperLstmDirection(
            emb_dim, aux_in_dim, n_aux, n_h, n_z, rng, use_layer_norm))
        self.bwd = self._add_child("bwd", HyperLstmDirection(
            emb_dim, aux_in_dim, n_aux, n_h, n_z, rng, use_layer_norm))

    def forward(self, s_mat: Tensor, aux_mat: Tensor,
                record_trace: bool = False):
        h_f, trace_f = self.fwd.run(s_mat, aux_mat, record_trace)
        h_b, trace_b = self.bwd.run(T.flip_rows(s_mat), T.flip_rows(aux_mat),
                                    record_trace)
        return T.concat([h_f, h_b]), trace_f, trace_b
