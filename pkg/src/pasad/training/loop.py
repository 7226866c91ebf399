"""Optimization loop, cross-validation driver, and random search.

Cross-validation folds run in spawned worker processes pinned to one
BLAS thread each, so fold results are bit-identical no matter how many
workers PASAD_THREADS allows, and repeated runs with the same seed
produce byte-identical logs and reports.
"""

from __future__ import annotations

import json
import multiprocessing as mp
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ..errors import ConfigError, ContractError, NonFiniteError
from ..features.pipeline import BandStats, WindowFeatures
from ..nets.model import AblationFlags, ModelConfig, PasadModel
from ..rng import derive
from ..tensor import Tape, Tensor, backward, cross_entropy_with_logits
from .metrics import Metrics, label_to_index
from .splits import CohortSplit, person_disjoint_split

LOG_COLUMNS = ("epoch", "train_loss", "val_sens", "val_spec", "val_acc", "val_f1")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 6.979e-5
    dropout: float = 0.2915
    batch_size: int = 10
    epochs: int = 50
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 10
    min_epochs: int = 0
    flags: AblationFlags = field(default_factory=AblationFlags)

    RANGES = {
        "learning_rate": (1e-6, 1e-4),
        "dropout": (0.1, 0.3),
        "batch_size": (5, 10),
    }

    def __post_init__(self):
        for name, (lo, hi) in self.RANGES.items():
            value = getattr(self, name)
            if not lo <= value <= hi:
                raise ConfigError(f"{name}={value} outside permitted range [{lo}, {hi}]")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "flags"}
        out["flags"] = self.flags.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        flags = AblationFlags(**d.pop("flags", {}))
        return cls(flags=flags, **d)


class Adam:
    def __init__(self, params: dict[str, Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for key, p in self.params.items():
            if p.grad is None:
                continue
            m = self.m[key]
            v = self.v[key]
            m *= b1
            m += (1 - b1) * p.grad
            v *= b2
            v += (1 - b2) * (p.grad * p.grad)
            p.data = p.data - self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()


def window_label(window: WindowFeatures) -> int:
    return label_to_index(window.label)


def window_loss(model: PasadModel, window: WindowFeatures, scale: float = 1.0):
    logits, _, _ = model.forward_window(window)
    loss = cross_entropy_with_logits(logits, window_label(window))
    if scale != 1.0:
        loss = loss * Tensor(scale)
    return loss


def evaluate(model: PasadModel, windows: list[WindowFeatures]) -> Metrics:
    if not windows:
        raise ContractError("evaluate needs at least one window")
    model.eval()
    y_true = [window_label(w) for w in windows]
    y_pred = [model.predict(w) for w in windows]
    return Metrics.from_predictions(y_true, y_pred)


@dataclass
class TrainResult:
    best_state: dict[str, np.ndarray]
    best_epoch: int
    best_f1: float
    log_rows: list[tuple]
    epochs_run: int


def train(model: PasadModel, train_windows: list[WindowFeatures],
          val_windows: list[WindowFeatures], config: TrainConfig) -> TrainResult:
    """Adam on per-window cross-entropy; keeps the best-validation-F1 state.

    Stops early after `patience` epochs without improvement, or as soon
    as validation F1 has been perfect for two consecutive epochs (no
    further improvement is possible).
    """
    if not train_windows or not val_windows:
        raise ContractError("training needs nonempty train and validation sets")
    params = model.named_params()
    opt = Adam(params, lr=config.learning_rate,
               beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    shuffle_rng = derive(config.seed, "batch-order")
    model.dropout_rng = derive(config.seed, "dropout")

    best_f1 = -1.0
    best_epoch = -1
    best_state = model.state_dict()
    log_rows: list[tuple] = []
    perfect_streak = 0
    epochs_run = 0

    for epoch in range(config.epochs):
        model.train()
        order = list(range(len(train_windows)))
        shuffle_rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            chunk = order[start:start + config.batch_size]
            opt.zero_grad()
            for idx in chunk:
                window = train_windows[idx]
                with Tape() as tape:
                    loss = window_loss(model, window, scale=1.0 / len(chunk))
                if not np.isfinite(loss.item()):
                    culprit = tape.first_nonfinite() or "loss"
                    raise NonFiniteError(
                        f"non-finite loss at epoch {epoch}; first bad tensor from op '{culprit}'")
                backward(loss, tape)
                epoch_loss += loss.item() * len(chunk)
            opt.step()
        epoch_loss /= len(order)

        val = evaluate(model, val_windows)
        log_rows.append((epoch, epoch_loss, val.sensitivity, val.specificity,
                         val.accuracy, val.f1))
        epochs_run = epoch + 1
        if val.f1 > best_f1:
            best_f1 = val.f1
            best_epoch = epoch
            best_state = model.state_dict()
        perfect_streak = perfect_streak + 1 if val.f1 >= 1.0 else 0
        if epoch + 1 < config.min_epochs:
            continue
        if perfect_streak >= 2:
            break
        if epoch - best_epoch >= config.patience:
            break

    model.load_state_dict(best_state)
    model.eval()
    return TrainResult(best_state=best_state, best_epoch=best_epoch,
                       best_f1=best_f1, log_rows=log_rows, epochs_run=epochs_run)


def write_log_csv(path, log_rows) -> None:
    lines = [",".join(LOG_COLUMNS)]
    for row in log_rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


# --- cohort-level driver ---------------------------------------------------

def subject_labels_of(windows: list[WindowFeatures]) -> dict[str, str]:
    labels: dict[str, str] = {}
    for w in windows:
        prior = labels.setdefault(w.subject_id, w.label)
        if prior != w.label:
            raise ContractError(f"subject {w.subject_id} has conflicting labels")
    return labels


def partition_windows(windows: list[WindowFeatures], split: CohortSplit):
    parts = {"train": [], "validation": [], "test": []}
    for w in windows:
        parts[split.subset_of(w.subject_id)].append(w)
    return parts["train"], parts["validation"], parts["test"]


def apply_noise_ablation(windows: list[WindowFeatures], stats: BandStats,
                         seed: int) -> list[WindowFeatures]:
    from ..synth import noise_replace  # local import; synth depends on features only
    out = []
    for w in windows:
        rng = derive(seed, "noise", w.subject_id, w.window_index)
        out.append(noise_replace(w, stats, rng))
    return out


def run_fold(windows: list[WindowFeatures], model_cfg: ModelConfig,
             train_cfg: TrainConfig, fold: int, out_dir=None):
    """Train and test one fold; returns (metrics, result, model)."""
    split = person_disjoint_split(subject_labels_of(windows), fold, train_cfg.seed)
    train_w, val_w, test_w = partition_windows(windows, split)
    if train_cfg.flags.noise_spectrogram:
        stats = BandStats.from_windows(train_w)
        noise_seed = int(derive(train_cfg.seed, "noise-root", fold).integers(0, 2 ** 31))
        train_w = apply_noise_ablation(train_w, stats, noise_seed)
        val_w = apply_noise_ablation(val_w, stats, noise_seed)
        test_w = apply_noise_ablation(test_w, stats, noise_seed)

    model_cfg = replace(model_cfg, dropout=train_cfg.dropout, flags=train_cfg.flags)
    fold_seed = int(derive(train_cfg.seed, "fold", fold).integers(0, 2 ** 31))
    model = PasadModel(model_cfg, seed=fold_seed)
    fold_cfg = replace(train_cfg, seed=fold_seed)
    result = train(model, train_w, val_w, fold_cfg)
    metrics = evaluate(model, test_w)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        model.save(out_dir / f"fold_{fold:02d}.pasd")
        write_log_csv(out_dir / f"fold_{fold:02d}_log.csv", result.log_rows)
    return metrics, result, model


def _fold_worker(args) -> tuple[int, dict, int]:
    windows, model_cfg, train_cfg, fold, out_dir = args
    metrics, result, _ = run_fold(windows, model_cfg, train_cfg, fold, out_dir)
    return fold, metrics.to_dict(), result.epochs_run


def _worker_count(n_folds: int) -> int:
    env = os.environ.get("PASAD_THREADS")
    limit = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(limit, n_folds))


def cross_validate(windows: list[WindowFeatures], model_cfg: ModelConfig,
                   train_cfg: TrainConfig, n_folds: int = 10,
                   out_dir=None) -> dict:
    """Person-disjoint k-fold run; returns the report dict (also see out_dir).

    Folds execute in spawned single-BLAS-thread workers so results do
    not depend on the degree of parallelism.
    """
    jobs = [(windows, model_cfg, train_cfg, fold, str(out_dir) if out_dir else None)
            for fold in range(n_folds)]
    workers = _worker_count(n_folds)
    prior = {k: os.environ.get(k) for k in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS")}
    os.environ["OMP_NUM_THREADS"] = "1"
    os.environ["OPENBLAS_NUM_THREADS"] = "1"
    try:
        ctx = mp.get_context("spawn")
        with ctx.Pool(processes=workers) as pool:
            outcomes = pool.map(_fold_worker, jobs)
    finally:
        for key, value in prior.items():
            if value is None:
                os.environ.pop(key, None)
            else:
                os.environ[key] = value

    outcomes.sort(key=lambda item: item[0])
    per_fold = [metrics for _, metrics, _ in outcomes]
    mean = {
        key: float(np.mean([m[key] for m in per_fold]))
        for key in ("sensitivity", "specificity", "accuracy", "f1")
    }
    report = {
        "n_folds": n_folds,
        "model_config": model_cfg.to_dict(),
        "train_config": train_cfg.to_dict(),
        "folds": per_fold,
        "epochs_run": [e for _, _, e in outcomes],
        "mean": mean,
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    return report


# --- random search ----------------------------------------------------------

@dataclass(frozen=True)
class SearchSpace:
    lr_range: tuple[float, float] = (1e-6, 1e-4)
    dropout_range: tuple[float, float] = (0.1, 0.3)
    batch_range: tuple[int, int] = (5, 10)
    epochs: int = 20


def sample_config(space: SearchSpace, rng, base: TrainConfig) -> TrainConfig:
    lo, hi = space.lr_range
    lr = float(np.exp(rng.uniform(np.log(lo), np.log(hi))))  # log-uniform
    dropout = float(rng.uniform(*space.dropout_range))
    batch = int(rng.integers(space.batch_range[0], space.batch_range[1] + 1))
    return replace(base, learning_rate=lr, dropout=dropout,
                   batch_size=batch, epochs=space.epochs)


def random_search(windows: list[WindowFeatures], model_cfg: ModelConfig,
                  space: SearchSpace, budget: int, seed: int,
                  base: TrainConfig | None = None) -> tuple[TrainConfig, list[dict]]:
    """Seeded uniform random search scored by fold-0 validation F1.

    Returns (best config, history); ties break toward the earlier sample.
    """
    if budget < 1:
        raise ConfigError("random search budget must be at least 1")
    base = base or TrainConfig(seed=seed)
    rng = derive(seed, "search")
    split = person_disjoint_split(subject_labels_of(windows), 0, seed)
    train_w, val_w, _ = partition_windows(windows, split)

    best_cfg = None
    best_f1 = -1.0
    history = []
    for i in range(budget):
        cfg = sample_config(space, rng, replace(base, seed=seed))
        model = PasadModel(replace(model_cfg, dropout=cfg.dropout, flags=cfg.flags),
                           seed=int(derive(seed, "search-model", i).integers(0, 2 ** 31)))
        result = train(model, train_w, val_w, cfg)
        history.append({
            "sample": i,
            "learning_rate": cfg.learning_rate,
            "dropout": cfg.dropout,
            "batch_size": cfg.batch_size,
            "val_f1": result.best_f1,
        })
        if result.best_f1 > best_f1:
            best_f1 = result.best_f1
            best_cfg = cfg
    return best_cfg, history
