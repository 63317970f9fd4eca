"""Per-target splits, MLP training with early stopping, inference and model files."""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from ..data import ScreenDataset, round_half_up
from ..errors import ArgumentError, ModelFormatError, ShapeError, TrainingError
from ..metrics import (
    TOP1_PERCENT,
    MetricsReport,
    RankedLibrary,
    ScoreThreshold,
    ClassicalMetrics,
    classical_metrics,
    enrichment_factor,
    evaluate_ranking,
)
from ..rng import Stream
from .features import FeatureMatrix, FeatureRecipe, recipe_from_dict, recipe_to_dict
from .network import Adam, NetConfig, backward, forward, init_params, weighted_bce
from .scaling import ScalerParams, apply_scaler

MODEL_FORMAT = "vscreen-mlp"
MODEL_VERSION = 1


def split_dataset(ds: ScreenDataset | np.ndarray, train_fraction: float = 0.75,
                  seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Label-stratified seeded split of one target into (train, validation) indices.

    Each class contributes ``round(train_fraction * count)`` rows to
    training, clamped so both sides keep at least one member of every class
    that has two or more.
    """
    labels = np.asarray(ds.labels if isinstance(ds, ScreenDataset) else ds)
    target = ds.target_id if isinstance(ds, ScreenDataset) else ""
    if not (0.0 < train_fraction < 1.0):
        raise ArgumentError("train_fraction must be in (0, 1)")
    if labels.size < 4:
        raise ArgumentError("split needs at least 4 ligands")
    if int(labels.sum()) < 2:
        raise ArgumentError("split needs at least 2 actives (validation EF would be undefined)")
    stream = Stream(seed, f"split:{target}")
    train, val = [], []
    for cls in (1, 0):
        idx = np.flatnonzero(labels == cls)
        k = round_half_up(train_fraction * idx.size)
        if idx.size >= 2:
            k = min(max(k, 1), idx.size - 1)
        perm = idx[stream.spawn(f"class{cls}").permutation(idx.size)]
        train.append(perm[:k])
        val.append(perm[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(val))


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_loss: float
    val_ef1: float
    best: bool


@dataclass
class TrainedModel:
    config: NetConfig
    n_inputs: int
    params: dict
    buffers: dict
    scaler: ScalerParams | None = None
    recipe: FeatureRecipe | None = None
    log: list[EpochLog] = field(default_factory=list)
    best_epoch: int = 0
    pos_weight: float = 1.0


def _val_ef1(scores: np.ndarray, labels: np.ndarray, groups: np.ndarray | None) -> float:
    if groups is None:
        return enrichment_factor(RankedLibrary.from_scores(scores, labels), 1.0)
    values = []
    for g in np.unique(groups):
        sel = groups == g
        if labels[sel].sum() > 0:
            values.append(enrichment_factor(RankedLibrary.from_scores(scores[sel], labels[sel]), 1.0))
    return statistics.median(values)


def train_mlp(
    X_train: np.ndarray,
    y_train: np.ndarray,
    config: NetConfig,
    X_val: np.ndarray,
    y_val: np.ndarray,
    *,
    val_groups: Sequence | None = None,
    scaler: ScalerParams | None = None,
    recipe: FeatureRecipe | None = None,
) -> TrainedModel:
    """Train on scaled matrices; keep the epoch with the best validation EF1%.

    With ``val_groups`` the stopping criterion is the median per-group EF1%.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    X_val = np.asarray(X_val, dtype=np.float64)
    y_train = np.asarray(y_train).astype(np.int8)
    y_val = np.asarray(y_val).astype(np.int8)
    if X_val.shape[0] == 0:
        raise ArgumentError("empty validation set")
    if X_train.shape[0] == 0:
        raise ArgumentError("empty training set")
    if X_val.shape[1] != X_train.shape[1]:
        raise ShapeError("training and validation widths differ")
    if y_val.sum() == 0:
        raise ArgumentError("validation set has no actives")
    groups = None if val_groups is None else np.asarray(val_groups)

    n_pos = int(y_train.sum())
    n_neg = int(y_train.size - n_pos)
    pos_weight = n_neg / n_pos if n_pos else 1.0

    root = Stream(config.seed, f"train:{config.name}")
    params, buffers = init_params(config, X_train.shape[1], root.spawn("init"))
    opt = Adam(config.learning_rate, config.adam_betas, config.adam_eps, config.weight_decay)
    shuffle = root.spawn("shuffle")
    dropout = root.spawn("dropout")
    bs = config.batch_size(X_train.shape[0])

    best = (-math.inf, None, None, 0)
    log: list[EpochLog] = []
    stale = 0
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle.permutation(X_train.shape[0])
        losses = []
        for b, start in enumerate(range(0, order.size, bs)):
            idx = order[start:start + bs]
            logits, cache = forward(config, params, buffers, X_train[idx], training=True, stream=dropout)
            loss, dlogits = weighted_bce(logits, y_train[idx], pos_weight)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b + 1}")
            opt.step(params, backward(config, params, cache, dlogits))
            losses.append(loss * idx.size)
        train_loss = math.fsum(losses) / order.size

        val_logits, _ = forward(config, params, buffers, X_val)
        ef1 = _val_ef1(val_logits, y_val, groups)
        improved = ef1 > best[0]
        if improved:
            best = (ef1, {k: v.copy() for k, v in params.items()},
                    {k: v.copy() for k, v in buffers.items()}, epoch)
            stale = 0
        else:
            stale += 1
        log.append(EpochLog(epoch, train_loss, ef1, improved))
        if stale >= config.patience:
            break

    return TrainedModel(config, X_train.shape[1], best[1], best[2], scaler, recipe,
                        log, best[3], pos_weight)


def predict(model: TrainedModel, matrix: np.ndarray | FeatureMatrix) -> np.ndarray:
    """Sigmoid scores (higher = more likely active); applies the model's scaler."""
    X = matrix.values if isinstance(matrix, FeatureMatrix) else np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise ShapeError(f"matrix width {X.shape[-1]} != model input width {model.n_inputs}")
    if model.scaler is not None:
        X = apply_scaler(X, model.scaler)
    logits, _ = forward(model.config, model.params, model.buffers, X)
    return expit(logits)


def delta_pct(model_ef1: float, baseline_ef1: float) -> float:
    """Relative change of a model's EF1% over a baseline, in percent."""
    if baseline_ef1 == 0:
        return math.inf if model_ef1 > 0 else 0.0
    return 100.0 * (model_ef1 - baseline_ef1) / baseline_ef1


def format_delta(delta: float) -> str:
    # a zero baseline has no meaningful relative change
    return f"{delta:+.1f}%" if math.isfinite(delta) else "n/a"


def f1_optimal_threshold(scores: np.ndarray, labels: np.ndarray) -> float:
    """Score threshold (predict active when score >= t) that maximizes F1."""
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    k = np.arange(1, y.size + 1)
    # only evaluate cut points at the last occurrence of each distinct score
    last = np.r_[s[1:] != s[:-1], True]
    f1 = 2 * tp / (k + y.sum())
    f1 = np.where(last, f1, -1.0)
    return float(s[int(np.argmax(f1))])


@dataclass(frozen=True)
class ModelEvaluation:
    report: MetricsReport
    at_threshold: ClassicalMetrics
    f1_threshold: float
    at_f1_threshold: ClassicalMetrics
    baseline_ef1: float | None
    delta_pct: float | None


def evaluate_model(model: TrainedModel, features: FeatureMatrix, *,
                   baseline_ef1: float | None = None, threshold: float = 0.5,
                   alpha: float = 20.0) -> ModelEvaluation:
    """Rank the rows by model score and compute the standard metric report."""
    scores = predict(model, features)
    lib = RankedLibrary.from_scores(scores, features.labels, features.ligand_ids)
    report = evaluate_ranking(lib, alpha=alpha, policy=TOP1_PERCENT)
    t_opt = f1_optimal_threshold(scores, features.labels)
    delta = None if baseline_ef1 is None else delta_pct(report.ef1, baseline_ef1)
    return ModelEvaluation(
        report,
        classical_metrics(lib, ScoreThreshold(threshold)),
        t_opt,
        classical_metrics(lib, ScoreThreshold(t_opt)),
        baseline_ef1,
        delta,
    )


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------


def save_model(model: TrainedModel, path: str | Path) -> None:
    """Write an ``.npz`` archive: arrays plus a JSON header with the format version."""
    meta = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": model.config.to_dict(),
        "n_inputs": model.n_inputs,
        "best_epoch": model.best_epoch,
        "pos_weight": model.pos_weight,
        "recipe": None if model.recipe is None else recipe_to_dict(model.recipe),
        "log": [[e.epoch, e.train_loss, e.val_ef1, e.best] for e in model.log],
        "params": sorted(model.params),
        "buffers": sorted(model.buffers),
    }
    arrays = {f"param/{k}": v for k, v in model.params.items()}
    arrays.update({f"buffer/{k}": v for k, v in model.buffers.items()})
    if model.scaler is not None:
        arrays["scaler/median"] = model.scaler.median
        arrays["scaler/iqr"] = model.scaler.iqr
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path: str | Path) -> TrainedModel:
    with np.load(path, allow_pickle=False) as z:
        if "meta" not in z.files:
            raise ModelFormatError(f"{path}: not a model file (no header)")
        meta = json.loads(z["meta"].tobytes().decode("utf-8"))
        if meta.get("format") != MODEL_FORMAT or meta.get("version") != MODEL_VERSION:
            raise ModelFormatError(
                f"{path}: model format {meta.get('format')!r} v{meta.get('version')!r}, "
                f"expected {MODEL_FORMAT!r} v{MODEL_VERSION}"
            )
        params = {k: z[f"param/{k}"] for k in meta["params"]}
        buffers = {k: z[f"buffer/{k}"] for k in meta["buffers"]}
        scaler = None
        if "scaler/median" in z.files:
            scaler = ScalerParams(z["scaler/median"], z["scaler/iqr"])
    return TrainedModel(
        NetConfig.from_dict(meta["config"]),
        meta["n_inputs"],
        params,
        buffers,
        scaler,
        None if meta["recipe"] is None else recipe_from_dict(meta["recipe"]),
        [EpochLog(*e) for e in meta["log"]],
        meta["best_epoch"],
        meta["pos_weight"],
    )


def write_training_log(model: TrainedModel, path: str | Path) -> None:
    lines = ["epoch,train_loss,val_ef1,best"]
    lines += [f"{e.epoch},{e.train_loss!r},{e.val_ef1!r},{int(e.best)}" for e in model.log]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
