"""Batch command-line interface.

Subcommands: synth, features, train, eval, interpret, gate-vis,
grad-check, bench.  Exit codes: 0 success, 1 contract or configuration
error, 2 I/O error.  Every run that produces an output directory echoes
its effective configuration there as resolved_config.json.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import ContractError, PasadError
from .features import melspec, windowing
from .features.pipeline import (
    BandStats,
    WindowFeatures,
    build_dataset,
    load_window_cache,
    save_window_cache,
)
from .interpret import (
    ShapConfig,
    freeze,
    kernel_shap,
    make_background,
    write_gates_csv,
    write_gates_svg,
    write_shap_csv,
    write_shap_svg,
)
from .nets.model import AblationFlags, ModelConfig, PasadModel
from .rng import derive
from .synth import SynthSpec, generate_cohort
from .training import TrainConfig, cross_validate, evaluate
from .verification import run_gradient_suite


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise ContractError(message)


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _resolved(out_dir, payload: dict) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "resolved_config.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _merge_train_config(file_cfg: dict, args) -> TrainConfig:
    section = dict(file_cfg.get("train", {}))
    flags = AblationFlags(**section.pop("flags", {}))
    cfg = TrainConfig(flags=flags, **section)
    overrides = {}
    for field_name, arg_name in (("learning_rate", "lr"), ("epochs", "epochs"),
                                 ("batch_size", "batch_size"), ("seed", "seed"),
                                 ("dropout", "dropout")):
        value = getattr(args, arg_name, None)
        if value is not None:
            overrides[field_name] = value
    return replace(cfg, **overrides) if overrides else cfg


def _merge_model_config(file_cfg: dict) -> ModelConfig:
    section = dict(file_cfg.get("model", {}))
    flags = AblationFlags(**section.pop("flags", {}))
    return ModelConfig(flags=flags, **section)


def _parse_window(spec: str) -> tuple[str, int]:
    subject, _, idx = spec.partition(":")
    if not subject or not idx:
        raise ContractError(f"window must be subject:index, got {spec!r}")
    return subject, int(idx)


def _find_window(windows: list[WindowFeatures], subject: str, index: int) -> WindowFeatures:
    for w in windows:
        if w.subject_id == subject and w.window_index == index:
            return w
    raise ContractError(f"window {subject}:{index} not found in cohort")


def _load_windows(args) -> list[WindowFeatures]:
    if getattr(args, "cache", None):
        return load_window_cache(args.cache)
    if getattr(args, "cohort", None):
        return build_dataset(args.cohort)
    raise ContractError("either --cohort or --cache is required")


# --- subcommand bodies ------------------------------------------------------

def cmd_synth(args) -> int:
    spec = SynthSpec.from_json(args.spec) if args.spec else SynthSpec()
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    generate_cohort(spec, args.out)
    _resolved(args.out, {"synth": spec.to_dict()})
    print(f"cohort written to {args.out}")
    return 0


def cmd_features(args) -> int:
    windows = build_dataset(args.cohort)
    save_window_cache(args.out, windows)
    _resolved(args.out, {"cohort": str(args.cohort), "windows": len(windows)})
    print(f"cached {len(windows)} windows to {args.out}")
    return 0


def cmd_train(args) -> int:
    file_cfg = _load_config_file(args.config)
    train_cfg = _merge_train_config(file_cfg, args)
    model_cfg = _merge_model_config(file_cfg)
    folds = args.folds if args.folds is not None else int(file_cfg.get("folds", 10))
    windows = _load_windows(args)
    _resolved(args.out, {
        "train": train_cfg.to_dict(), "model": model_cfg.to_dict(), "folds": folds,
    })
    report = cross_validate(windows, model_cfg, train_cfg, n_folds=folds, out_dir=args.out)
    print(json.dumps(report["mean"], sort_keys=True, indent=2))
    return 0


def cmd_eval(args) -> int:
    model = PasadModel.load(args.checkpoint)
    windows = _load_windows(args)
    metrics = evaluate(model, windows)
    print(json.dumps(metrics.to_dict(), sort_keys=True, indent=2))
    return 0


def cmd_interpret(args) -> int:
    model = PasadModel.load(args.checkpoint)
    windows = _load_windows(args)
    subject, index = _parse_window(args.window)
    window = _find_window(windows, subject, index)
    shap_cfg = ShapConfig(coalition_samples=args.samples, background=args.background,
                          seed=args.seed if args.seed is not None else 0)
    stats = BandStats.from_windows(windows)
    background = make_background(shap_cfg.background, stats.pixel_mean)
    frozen = freeze(model, window)
    report = kernel_shap(frozen, shap_cfg, background)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_shap_csv(out / "shap.csv", report)
    write_shap_svg(out / "shap.svg", report, window.mel)
    _resolved(out, {"shap": {"band_count": shap_cfg.band_count,
                             "coalition_samples": shap_cfg.coalition_samples,
                             "background": shap_cfg.background, "seed": shap_cfg.seed},
                    "window": args.window, "checkpoint": str(args.checkpoint)})
    print(f"attribution written to {out}/shap.csv and {out}/shap.svg "
          f"(efficiency gap {report.efficiency_gap:.2e})")
    return 0


def cmd_gate_vis(args) -> int:
    model = PasadModel.load(args.checkpoint)
    windows = _load_windows(args)
    subject, index = _parse_window(args.window)
    window = _find_window(windows, subject, index)
    model.eval()
    _, trace_f, _ = model.forward_window(window, record_trace=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_gates_csv(out / "gates.csv", trace_f)
    write_gates_svg(out / "gates.svg", trace_f)
    _resolved(out, {"window": args.window, "checkpoint": str(args.checkpoint)})
    print(f"gate trace written to {out}/gates.csv and {out}/gates.svg")
    return 0


def cmd_grad_check(args) -> int:
    results = run_gradient_suite(seed=args.seed if args.seed is not None else 0)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} gradient checks passed")
    return 1 if failed else 0


def _bench_window(seed: int) -> WindowFeatures:
    rng = derive(seed, "bench-window")
    mel = rng.uniform(-80.0, 0.0, size=(windowing.N_SEGMENTS, melspec.N_MELS, melspec.N_FRAMES))
    change = rng.standard_normal((windowing.N_SEGMENTS, 8))
    return WindowFeatures("bench", "CWS", 0, mel, change)


def cmd_bench(args) -> int:
    model = PasadModel.load(args.checkpoint)
    model.eval()
    window = _bench_window(args.seed if args.seed is not None else 0)
    model.forward_window(window)  # warm-up
    times = []
    for _ in range(args.repeat):
        t0 = time.perf_counter()
        model.forward_window(window)
        times.append((time.perf_counter() - t0) * 1000.0)
    times = np.array(times)
    payload = {
        "repeats": int(args.repeat),
        "mean_ms": float(times.mean()),
        "p50_ms": float(np.percentile(times, 50)),
        "p95_ms": float(np.percentile(times, 95)),
        "max_ms": float(times.max()),
    }
    print(json.dumps(payload, sort_keys=True, indent=2))
    return 0


# --- parser ------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="pasad", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--spec", default=None, help="SynthSpec JSON file (defaults otherwise)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("features", help="extract and cache window features")
    p.add_argument("--cohort", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_features)

    p = sub.add_parser("train", help="person-disjoint cross-validation")
    p.add_argument("--cohort", default=None)
    p.add_argument("--cache", default=None)
    p.add_argument("--config", default=None, help="JSON with train/model sections")
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="metrics of a checkpoint over a cohort")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cohort", default=None)
    p.add_argument("--cache", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("interpret", help="frozen-gate band attribution for one window")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cohort", default=None)
    p.add_argument("--cache", default=None)
    p.add_argument("--window", required=True, help="subject:index")
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=2048)
    p.add_argument("--background", choices=("dataset_mean", "zeros"), default="dataset_mean")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_interpret)

    p = sub.add_parser("gate-vis", help="gate-weight change trace for one window")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--cohort", default=None)
    p.add_argument("--cache", default=None)
    p.add_argument("--window", required=True, help="subject:index")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gate_vis)

    p = sub.add_parser("grad-check", help="finite-difference verification suite")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_grad_check)

    p = sub.add_parser("bench", help="single-window inference latency")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--repeat", type=int, default=120)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 2
    except PasadError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
