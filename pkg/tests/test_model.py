"""Model assembly: ablation wiring, serialization, parameter bookkeeping."""

import numpy as np
import pytest

from pasad.errors import ConfigError
from pasad.features import acoustic
from pasad.features.pipeline import WindowFeatures
from pasad.nets import AblationFlags, ModelConfig, PasadModel
from pasad.rng import derive

SMALL = dict(embedding_dim=200, channels=8, conv_layers=5, nonlocal_blocks=1,
             ref_dim=200, n_aux=4, n_h=8, n_z=4, head_hidden=8)


def window(seed=0, with_raw=False):
    rng = derive(seed, "model-win")
    raw_p = rng.standard_normal((19, 24)) if with_raw else None
    raw_a = rng.standard_normal((19, acoustic.FEATURE_DIM)) if with_raw else None
    return WindowFeatures("S0", "CWS", 0,
                          rng.uniform(-80, 0, (19, 64, 10)),
                          rng.standard_normal((19, 8)),
                          raw_physio=raw_p, raw_acoustic=raw_a)


class TestConfig:
    def test_defaults_are_full_scale(self):
        cfg = ModelConfig()
        assert (cfg.embedding_dim, cfg.channels, cfg.conv_layers) == (533, 62, 7)
        assert (cfg.n_aux, cfg.n_h, cfg.n_z, cfg.ref_dim) == (234, 915, 487, 506)

    def test_extractor_ranges_enforced(self):
        with pytest.raises(ConfigError):
            ModelConfig(**{**SMALL, "embedding_dim": 100})

    def test_ref_range_enforced(self):
        with pytest.raises(ConfigError):
            ModelConfig(**{**SMALL, "ref_dim": 100})

    def test_conflicting_aux_flags_rejected(self):
        with pytest.raises(ConfigError):
            AblationFlags(aux_spectrogram_only=True, aux_changescore_only=True)

    def test_round_trip_dict(self):
        cfg = ModelConfig(**SMALL, flags=AblationFlags(no_nonlocal=True))
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg


class TestAblations:
    def test_no_nonlocal_parity(self):
        base = PasadModel(ModelConfig(**SMALL), seed=0)
        swapped = PasadModel(ModelConfig(**SMALL, flags=AblationFlags(no_nonlocal=True)), seed=0)
        p_base = base.named_params()
        p_swap = swapped.named_params()
        nl_names = {k for k in p_base if ".nl0." in k}
        assert nl_names, "expected non-local parameters in the reference model"
        # outside the swapped block, names and shapes are identical
        rest_base = {k: v.shape for k, v in p_base.items() if ".nl0." not in k}
        rest_swap = {k: v.shape for k, v in p_swap.items() if ".nl0." not in k}
        assert rest_base == rest_swap
        # the replacement is a 3x3 conv stage with matching channel count
        assert p_swap["fx.nl0.conv.W"].shape == (8, 8, 3, 3)

    def test_aux_input_wiring(self):
        full = PasadModel(ModelConfig(**SMALL), seed=0)
        spec_only = PasadModel(ModelConfig(
            **SMALL, flags=AblationFlags(aux_spectrogram_only=True)), seed=0)
        cs_only = PasadModel(ModelConfig(
            **SMALL, flags=AblationFlags(aux_changescore_only=True)), seed=0)
        shapes = {m: m.bi.fwd.aux._params["Wx_i"].shape[1]
                  for m in (full, spec_only, cs_only)}
        assert shapes[full] == 400 and shapes[spec_only] == 200 and shapes[cs_only] == 200
        logits, _, _ = spec_only.forward_window(window(1))
        assert logits.shape == (2,)

    def test_raw_physio_input(self):
        model = PasadModel(ModelConfig(**SMALL, flags=AblationFlags(raw_physio=True)), seed=0)
        assert model.ref.l1.w.shape == (200, 24)
        logits, _, _ = model.forward_window(window(2, with_raw=True))
        assert np.all(np.isfinite(logits.data))

    def test_raw_acoustic_1d_input(self):
        model = PasadModel(ModelConfig(
            **SMALL, flags=AblationFlags(raw_acoustic_1d=True)), seed=0)
        assert model.speech_shape == (1, 1, acoustic.FEATURE_DIM)
        # conv stages use width-3 kernels over the feature axis
        conv_stage = next(s for kind, s in model.fx.stages if kind == "conv")
        assert conv_stage.conv.kernel.shape[2:] == (1, 3)
        logits, _, _ = model.forward_window(window(3, with_raw=True))
        assert np.all(np.isfinite(logits.data))


class TestSerialization:
    def test_checkpoint_round_trip_predictions(self, tmp_path):
        model = PasadModel(ModelConfig(**SMALL), seed=5)
        w = window(4)
        model.eval()
        want, _, _ = model.forward_window(w)
        path = tmp_path / "m.pasd"
        model.save(path)
        clone = PasadModel.load(path)
        got, _, _ = clone.forward_window(w)
        np.testing.assert_array_equal(got.data, want.data)

    def test_flags_survive_round_trip(self, tmp_path):
        cfg = ModelConfig(**SMALL, flags=AblationFlags(aux_changescore_only=True))
        model = PasadModel(cfg, seed=1)
        model.save(tmp_path / "m.pasd")
        clone = PasadModel.load(tmp_path / "m.pasd")
        assert clone.config == cfg

    def test_prefix_conventions(self):
        model = PasadModel(ModelConfig(**SMALL), seed=0)
        names = set(model.named_params()) | set(model.named_state())
        prefixes = {n.split(".")[0] for n in names}
        assert prefixes == {"fx", "ref", "hyper", "head"}
        assert any(n.startswith("hyper.fwd.") for n in names)
        assert any(n.startswith("hyper.bwd.") for n in names)


class TestForward:
    def test_wrong_segment_count_rejected(self):
        from pasad.errors import ContractError
        model = PasadModel(ModelConfig(**SMALL), seed=0)
        rng = derive(6, "short-win")
        with pytest.raises(ContractError):
            bad = WindowFeatures.__new__(WindowFeatures)
            bad.subject_id, bad.label, bad.window_index = "S", "CWS", 0
            bad.mel = rng.uniform(-80, 0, (7, 64, 10))
            bad.change = rng.standard_normal((7, 8))
            bad.raw_physio = bad.raw_acoustic = None
            model.forward_window(bad)

    def test_train_eval_dropout_distinction(self):
        model = PasadModel(ModelConfig(**SMALL), seed=2)
        w = window(7)
        model.eval()
        a, _, _ = model.forward_window(w)
        b, _, _ = model.forward_window(w)
        np.testing.assert_array_equal(a.data, b.data)
        model.train()
        model.dropout_rng = derive(0, "d1")
        c, _, _ = model.forward_window(w)
        model.dropout_rng = derive(1, "d2")
        d, _, _ = model.forward_window(w)
        assert not np.array_equal(c.data, d.data)
