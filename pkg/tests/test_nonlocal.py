"""Non-local block vs a brute-force pairwise-sum reference, plus extractors."""

import numpy as np
import pytest

from pasad import tensor as T
from pasad.errors import ConfigError
from pasad.gradcheck import check_gradients
from pasad.nets import (
    FeatureExtractor,
    FeatureExtractorConfig,
    NonLocalBlock,
    ReferenceExtractor,
)
from pasad.rng import derive
from pasad.tensor import Tensor


def conv1x1(x, w, b):
    """(C_in,H,W) -> (C_out,H,W) pointwise convolution, plain numpy."""
    return np.einsum("oi,ihw->ohw", w[:, :, 0, 0], x) + b[:, None, None]


def brute_force_nonlocal(x, block):
    """Position-by-position evaluation of the pairwise-attention update.

    For each position i: y_i = sum_j softmax_j(theta_i . phi_j) g_j,
    then the output projection and the residual connection.
    """
    theta = conv1x1(x, block.theta.kernel.data, block.theta.bias.data)
    phi = conv1x1(x, block.phi.kernel.data, block.phi.bias.data)
    g = conv1x1(x, block.g.kernel.data, block.g.bias.data)
    c, h, w = x.shape
    inner = theta.shape[0]
    L = h * w
    tf = theta.reshape(inner, L)
    pf = phi.reshape(inner, L)
    gf = g.reshape(inner, L)
    mixed = np.zeros((inner, L))
    for i in range(L):
        scores = np.array([tf[:, i] @ pf[:, j] for j in range(L)])
        scores = np.exp(scores - scores.max())
        weights = scores / scores.sum()
        for j in range(L):
            mixed[:, i] += weights[j] * gf[:, j]
    z = conv1x1(mixed.reshape(inner, h, w), block.out.kernel.data, block.out.bias.data)
    return z + x


class TestNonLocalBlock:
    def test_zero_theta_phi_gives_uniform_attention(self):
        rng = derive(0, "nl-uniform")
        block = NonLocalBlock(4, rng)
        block.theta.kernel.data[:] = 0.0
        block.theta.bias.data[:] = 0.0
        block.phi.kernel.data[:] = 0.0
        block.phi.bias.data[:] = 0.0
        x = rng.standard_normal((4, 3, 3))
        att = block.attention(Tensor(x)).data
        np.testing.assert_allclose(att, 1.0 / 9.0, atol=1e-12)
        # pre-residual output equals the same mean-pooled vector everywhere
        out = block.forward(Tensor(x)).data - x
        flat = out.reshape(4, -1)
        for col in range(flat.shape[1]):
            np.testing.assert_allclose(flat[:, col], flat[:, 0], atol=1e-12)

    def test_zero_output_projection_is_identity(self):
        rng = derive(1, "nl-id")
        block = NonLocalBlock(4, rng)
        block.out.kernel.data[:] = 0.0
        block.out.bias.data[:] = 0.0
        x = rng.standard_normal((4, 5, 2))
        out = block.forward(Tensor(x)).data
        np.testing.assert_array_equal(out, x)

    def test_matches_brute_force_oracle(self):
        rng = derive(2, "nl-oracle")
        block = NonLocalBlock(2, rng)
        x = rng.standard_normal((2, 3, 3))
        got = block.forward(Tensor(x)).data
        want = brute_force_nonlocal(x, block)
        np.testing.assert_allclose(got, want, atol=1e-10)

    def test_brute_force_equivalence_100_random_instances(self):
        worst = 0.0
        for seed in range(100):
            rng = derive(seed, "nl-sweep")
            c = int(rng.integers(2, 5))
            h = int(rng.integers(1, 5))
            w = int(rng.integers(1, 5))
            block = NonLocalBlock(c, rng)
            x = rng.standard_normal((c, h, w))
            got = block.forward(Tensor(x)).data
            want = brute_force_nonlocal(x, block)
            worst = max(worst, np.abs(got - want).max())
        assert worst < 1e-9

    def test_attention_rows_sum_to_one(self):
        rng = derive(3, "nl-rows")
        block = NonLocalBlock(6, rng)
        x = rng.standard_normal((6, 4, 3)) * 10
        att = block.attention(Tensor(x)).data
        np.testing.assert_allclose(att.sum(axis=-1), 1.0, atol=1e-12)

    def test_shape_preserved(self):
        rng = derive(4, "nl-shape")
        for c, h, w in ((2, 1, 1), (3, 2, 5), (8, 64, 10)):
            block = NonLocalBlock(c, rng)
            x = rng.standard_normal((c, h, w))
            assert block.forward(Tensor(x)).shape == (c, h, w)

    def test_spatial_permutation_equivariance(self):
        # with the output projection bypassed, permuting positions permutes
        # the pre-residual update identically
        rng = derive(5, "nl-perm")
        block = NonLocalBlock(2, rng)
        block.out.kernel.data = np.zeros((2, 1, 1, 1))
        block.out.kernel.data[0, 0, 0, 0] = 1.0
        block.out.kernel.data[1, 0, 0, 0] = 1.0
        block.out.bias.data[:] = 0.0
        x = rng.standard_normal((2, 2, 3))
        pre = (block.forward(Tensor(x)).data - x).reshape(2, -1)
        perm = derive(6, "perm").permutation(6)
        xp = x.reshape(2, -1)[:, perm].reshape(2, 2, 3)
        pre_p = (block.forward(Tensor(xp)).data - xp).reshape(2, -1)
        np.testing.assert_allclose(pre_p, pre[:, perm], atol=1e-10)

    def test_single_channel_rejected(self):
        with pytest.raises(ConfigError):
            NonLocalBlock(1, derive(7, "nl-bad"))

    def test_batched_matches_sequential(self):
        rng = derive(8, "nl-batch")
        block = NonLocalBlock(3, rng)
        xs = rng.standard_normal((5, 3, 4, 2))
        batched = block.forward(Tensor(xs)).data
        for i in range(5):
            single = block.forward(Tensor(xs[i])).data
            np.testing.assert_allclose(batched[i], single, atol=1e-12)


class TestFeatureExtractorConfig:
    def test_valid_ranges_accepted(self):
        FeatureExtractorConfig(nonlocal_blocks=1, conv_layers=5, channels=8, embedding_dim=200)
        FeatureExtractorConfig(nonlocal_blocks=4, conv_layers=12, channels=128, embedding_dim=800)

    @pytest.mark.parametrize("kwargs", [
        dict(nonlocal_blocks=0, conv_layers=5, channels=8, embedding_dim=200),
        dict(nonlocal_blocks=5, conv_layers=5, channels=8, embedding_dim=200),
        dict(nonlocal_blocks=1, conv_layers=4, channels=8, embedding_dim=200),
        dict(nonlocal_blocks=1, conv_layers=13, channels=8, embedding_dim=200),
        dict(nonlocal_blocks=1, conv_layers=5, channels=7, embedding_dim=200),
        dict(nonlocal_blocks=1, conv_layers=5, channels=129, embedding_dim=200),
        dict(nonlocal_blocks=1, conv_layers=5, channels=8, embedding_dim=199),
        dict(nonlocal_blocks=1, conv_layers=5, channels=8, embedding_dim=801),
    ])
    def test_out_of_range_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            FeatureExtractorConfig(**kwargs)


class TestFeatureExtractor:
    def test_embedding_length_contract(self):
        rng = derive(9, "fx-shape")
        for emb in (6, 32):
            fx = FeatureExtractor(channels=4, nonlocal_blocks=1, conv_layers=1,
                                  embedding_dim=emb, rng=rng, in_shape=(1, 8, 5))
            out = fx.forward(Tensor(rng.standard_normal((1, 8, 5))), train=False)
            assert out.shape == (emb,)

    def test_eval_determinism(self):
        rng = derive(10, "fx-det")
        fx = FeatureExtractor(channels=4, nonlocal_blocks=1, conv_layers=2,
                              embedding_dim=16, rng=rng, in_shape=(1, 8, 5))
        x = rng.standard_normal((1, 8, 5))
        a = fx.forward(Tensor(x), train=False).data
        b = fx.forward(Tensor(x.copy()), train=False).data
        np.testing.assert_array_equal(a, b)

    def test_gradient_wrt_input(self):
        rng = derive(11, "fx-grad")
        fx = FeatureExtractor(channels=2, nonlocal_blocks=1, conv_layers=1,
                              embedding_dim=6, rng=rng, in_shape=(1, 5, 3))
        err = check_gradients(
            lambda x: T.tsum(fx.forward(x, train=False)),
            Tensor(rng.standard_normal((1, 5, 3))), eps=1e-5)
        assert err < 1e-3

    def test_stage_count_is_independent_sum(self):
        rng = derive(12, "fx-count")
        fx = FeatureExtractor(channels=4, nonlocal_blocks=2, conv_layers=5,
                              embedding_dim=16, rng=rng, in_shape=(1, 8, 5))
        convs = [k for k, _ in fx.stages if k == "conv"]
        nls = [k for k, _ in fx.stages if k == "nl"]
        assert len(nls) == 2 and len(convs) == 7  # 2 paired + 5 standalone

    def test_no_nonlocal_swaps_blocks_for_convs(self):
        rng = derive(13, "fx-ablate")
        fx = FeatureExtractor(channels=4, nonlocal_blocks=1, conv_layers=1,
                              embedding_dim=8, rng=rng, in_shape=(1, 6, 4),
                              no_nonlocal=True)
        assert not any(isinstance(s, NonLocalBlock) for _, s in fx.stages)
        out = fx.forward(Tensor(rng.standard_normal((1, 6, 4))), train=False)
        assert out.shape == (8,)


class TestReferenceExtractor:
    def test_zero_weights_give_zero_embedding(self):
        rng = derive(14, "ref-zero")
        ref = ReferenceExtractor(8, 6, rng)
        for t in ref.named_params().values():
            t.data = np.zeros_like(t.data)
        out = ref.forward(Tensor(rng.standard_normal(8)))
        np.testing.assert_array_equal(out.data, np.zeros(6))

    def test_outputs_non_negative(self):
        rng = derive(15, "ref-relu")
        ref = ReferenceExtractor(8, 6, rng)
        for seed in range(20):
            x = derive(seed, "ref-in").standard_normal(8) * 5
            assert np.all(ref.forward(Tensor(x)).data >= 0.0)

    def test_gradient(self):
        rng = derive(16, "ref-grad")
        ref = ReferenceExtractor(8, 5, rng)
        err = check_gradients(lambda x: T.tsum(ref.forward(x)),
                              Tensor(rng.standard_normal(8) + 1.0))
        assert err < 1e-4
