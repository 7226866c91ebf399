"""CLI surface tests: subcommands, exit codes, file outputs, determinism."""

import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from pasad.cli import main
from pasad.features import build_dataset
from pasad.nets import ModelConfig, PasadModel
from pasad.synth import SynthSpec, generate_cohort

TINY_MODEL = dict(embedding_dim=200, channels=8, conv_layers=5, nonlocal_blocks=1,
                  ref_dim=200, n_aux=4, n_h=8, n_z=4, head_hidden=8)


@pytest.fixture(scope="module")
def micro_cohort(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli") / "cohort"
    generate_cohort(SynthSpec(subjects_per_class=2, windows_per_subject=2, seed=5), root)
    return root


@pytest.fixture(scope="module")
def tiny_checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "model.pasd"
    PasadModel(ModelConfig(**TINY_MODEL), seed=3).save(path)
    return path


class TestExitCodes:
    def test_unknown_flag_rejected_with_config_exit(self, capsys):
        assert main(["grad-check", "--bogus"]) == 1
        assert "bogus" in capsys.readouterr().err

    def test_missing_file_is_io_error(self, tmp_path, capsys):
        code = main(["eval", "--checkpoint", str(tmp_path / "nope.pasd"),
                     "--cohort", str(tmp_path)])
        assert code == 2

    def test_bad_window_spec_is_config_error(self, tiny_checkpoint, micro_cohort, tmp_path):
        code = main(["interpret", "--checkpoint", str(tiny_checkpoint),
                     "--cohort", str(micro_cohort), "--window", "nope",
                     "--out", str(tmp_path / "o")])
        assert code == 1


class TestSynthAndFeatures:
    def test_synth_written_and_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["synth", "--out", str(a), "--seed", "9"]) == 0
        assert main(["synth", "--out", str(b), "--seed", "9"]) == 0
        fa = sorted(p.relative_to(a) for p in a.rglob("*.f32"))
        for rel in fa:
            assert (a / rel).read_bytes() == (b / rel).read_bytes()
        resolved = json.loads((a / "resolved_config.json").read_text())
        assert resolved["synth"]["seed"] == 9

    def test_features_cache_round_trip(self, micro_cohort, tmp_path):
        cache = tmp_path / "cache"
        assert main(["features", "--cohort", str(micro_cohort), "--out", str(cache)]) == 0
        index = json.loads((cache / "index.json").read_text())
        assert len(index["windows"]) == 8
        from pasad.features import load_window_cache
        windows = load_window_cache(cache)
        direct = build_dataset(micro_cohort)
        got = {(w.subject_id, w.window_index): w for w in windows}
        for w in direct:
            cached = got[(w.subject_id, w.window_index)]
            np.testing.assert_array_equal(cached.mel, w.mel)
            np.testing.assert_array_equal(cached.change, w.change)


class TestEval:
    def test_untrained_checkpoint_near_chance(self, tiny_checkpoint, micro_cohort, capsys):
        assert main(["eval", "--checkpoint", str(tiny_checkpoint),
                     "--cohort", str(micro_cohort)]) == 0
        metrics = json.loads(capsys.readouterr().out)
        assert 0.4 <= metrics["accuracy"] <= 0.6
        assert metrics["tp"] + metrics["fp"] + metrics["tn"] + metrics["fn"] == 8


class TestInterpretCommands:
    def test_interpret_outputs(self, tiny_checkpoint, micro_cohort, tmp_path):
        out = tmp_path / "interp"
        code = main(["interpret", "--checkpoint", str(tiny_checkpoint),
                     "--cohort", str(micro_cohort), "--window", "S000:1",
                     "--out", str(out), "--samples", "64", "--seed", "1"])
        assert code == 0
        lines = (out / "shap.csv").read_text().strip().splitlines()
        assert len(lines) == 33
        ET.fromstring((out / "shap.svg").read_text())
        assert (out / "resolved_config.json").exists()

    def test_gate_vis_outputs(self, tiny_checkpoint, micro_cohort, tmp_path):
        out = tmp_path / "gates"
        code = main(["gate-vis", "--checkpoint", str(tiny_checkpoint),
                     "--cohort", str(micro_cohort), "--window", "S001:0",
                     "--out", str(out)])
        assert code == 0
        lines = (out / "gates.csv").read_text().strip().splitlines()
        assert len(lines) == 20
        ET.fromstring((out / "gates.svg").read_text())


class TestBench:
    def test_latency_json(self, tiny_checkpoint, capsys):
        assert main(["bench", "--checkpoint", str(tiny_checkpoint),
                     "--repeat", "5"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["repeats"] == 5
        assert payload["p50_ms"] > 0
        assert payload["p95_ms"] >= payload["p50_ms"]

    def test_help_lists_flags(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["bench", "--help"])
        assert e.value.code == 0
        out = capsys.readouterr().out
        assert "--repeat" in out and "--checkpoint" in out


class TestTrainCommand:
    def test_micro_cross_validation(self, tmp_path):
        cohort = tmp_path / "cohort14"
        generate_cohort(SynthSpec(subjects_per_class=7, windows_per_subject=1, seed=6), cohort)
        cfg = {
            "train": {"learning_rate": 1e-4, "dropout": 0.15, "batch_size": 5,
                      "epochs": 1, "seed": 0},
            "model": TINY_MODEL,
            "folds": 1,
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "run"
        code = main(["train", "--cohort", str(cohort), "--config", str(cfg_path),
                     "--out", str(out)])
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert len(report["folds"]) == 1
        assert (out / "fold_00.pasd").exists()
        log = (out / "fold_00_log.csv").read_text().splitlines()
        assert log[0] == "epoch,train_loss,val_sens,val_spec,val_acc,val_f1"
        assert (out / "resolved_config.json").exists()
        # reloading the checkpoint reproduces the logged validation F1
        model = PasadModel.load(out / "fold_00.pasd")
        from pasad.training import evaluate, partition_windows, person_disjoint_split
        from pasad.training.loop import subject_labels_of
        windows = build_dataset(cohort)
        split = person_disjoint_split(subject_labels_of(windows), 0, 0)
        _, val_w, _ = partition_windows(windows, split)
        logged_f1 = float(log[-1].split(",")[-1])
        assert abs(evaluate(model, val_w).f1 - logged_f1) < 1e-12
