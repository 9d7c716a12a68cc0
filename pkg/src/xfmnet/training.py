"""Training loop, evaluation and checkpoint round-trips for :class:`XFMNet`."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .config import TrainConfig
from .data import Normalizer, WindowDataset, seasonal_naive
from .model import XFMNet
from .numerics import Adam, load_checkpoint, mse_loss, no_grad, save_checkpoint

log = logging.getLogger(__name__)

METRIC_FIELDS = ("epoch", "split", "mse", "mae")


class TrainingDiverged(FloatingPointError):
    """Raised when a loss or gradient stops being finite; the message names the step."""


@dataclass
class ErrorAccumulator:
    """Running sums for MSE and MAE over many batches."""

    sq: float = 0.0
    ab: float = 0.0
    n: int = 0

    def add(self, pred: np.ndarray, target: np.ndarray) -> None:
        e = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
        self.sq += float(np.sum(e * e))
        self.ab += float(np.sum(np.abs(e)))
        self.n += e.size

    @property
    def mse(self) -> float:
        if not self.n:
            raise ValueError("no predictions accumulated")
        return self.sq / self.n

    @property
    def mae(self) -> float:
        if not self.n:
            raise ValueError("no predictions accumulated")
        return self.ab / self.n


@dataclass
class TrainResult:
    model: XFMNet
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_mse: float = float("inf")
    steps: int = 0


def _subsample(starts: np.ndarray, stride: int, offset: int = 0) -> np.ndarray:
    return starts[offset % stride :: stride]


def evaluate(model: XFMNet, ds: WindowDataset, split: str, batch_size: int = 32, stride: int = 1) -> tuple[float, float]:
    """MSE and MAE over a split in normalized units (every ``stride``-th window)."""
    acc = ErrorAccumulator()
    was_training = model.training
    model.eval()
    starts = _subsample(ds.starts(split), stride)
    with no_grad():
        for b in range(0, len(starts), batch_size):
            x, f, m, y = ds.batch(starts[b : b + batch_size])
            acc.add(model(x, f, m).data, y)
    model.train(was_training)
    return acc.mse, acc.mae


def seasonal_naive_metrics(ds: WindowDataset, split: str, period: int, stride: int = 1) -> tuple[float, float]:
    acc = ErrorAccumulator()
    starts = _subsample(ds.starts(split), stride)
    for b in range(0, len(starts), 256):
        x, _, _, y = ds.batch(starts[b : b + 256])
        acc.add(seasonal_naive(x, ds.horizon, period), y)
    return acc.mse, acc.mae


def write_metrics_csv(path: str | Path, history: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in history:
            writer.writerow({k: (repr(row[k]) if isinstance(row[k], float) else row[k]) for k in METRIC_FIELDS})


def checkpoint_meta(model: XFMNet, ds: WindowDataset, extra: dict | None = None) -> dict:
    meta = {
        "config": model.cfg.to_dict(),
        "n_stations": ds.n_stations,
        "channels": ds.channels,
        "kernels_fitted": model.kernels_fitted,
        "normalizer": {"mean": ds.normalizer.mean.tolist(), "std": ds.normalizer.std.tolist()},
    }
    meta.update(extra or {})
    return meta


def save_model(directory: str | Path, model: XFMNet, ds: WindowDataset, extra: dict | None = None) -> Path:
    return save_checkpoint(directory, model.state_dict(), checkpoint_meta(model, ds, extra))


def load_model(directory: str | Path) -> tuple[XFMNet, dict]:
    """Rebuild a model from a checkpoint directory; returns ``(model, meta)``."""
    tensors, meta = load_checkpoint(directory)
    cfg = TrainConfig.from_dict(meta["config"])
    model = XFMNet(cfg, meta["n_stations"], meta["channels"])
    model.load_state_dict(tensors)
    if meta.get("kernels_fitted"):
        model.mark_kernels_fitted()
    return model, meta


def normalizer_from_meta(meta: dict) -> Normalizer:
    return Normalizer(np.asarray(meta["normalizer"]["mean"]), np.asarray(meta["normalizer"]["std"]))


def train(
    cfg: TrainConfig,
    ds: WindowDataset,
    out_dir: str | Path | None = None,
    eval_stride: int = 1,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Fit a fresh model with Adam on MSE, keeping the best validation checkpoint.

    Parameters
    ----------
    cfg : TrainConfig
        Hyperparameters, including ``epochs``, ``patience`` and ``train_stride``.
    ds : WindowDataset
        Normalized data with train/val/test splits.
    out_dir : path, optional
        If given, the best checkpoint goes to ``out_dir/checkpoint`` and the
        per-epoch metrics to ``out_dir/metrics.csv``.
    eval_stride : int
        Validate on every ``eval_stride``-th window during training. Model
        selection uses these numbers; final reports should call
        :func:`evaluate` on the full split.
    """
    cfg.validate()
    model = XFMNet(cfg, ds.n_stations, ds.channels, rng=np.random.default_rng(cfg.seed))
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    opt = Adam(model.named_parameters(), lr=cfg.lr)
    starts = ds.starts("train")
    result = TrainResult(model)
    best_state = None
    stale = 0
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    for epoch in range(1, cfg.epochs + 1):
        model.train()
        order = shuffle_rng.permutation(_subsample(starts, cfg.train_stride, epoch - 1))
        acc = ErrorAccumulator()
        for b in range(0, len(order), cfg.batch_size):
            x, f, m, y = ds.batch(order[b : b + cfg.batch_size])
            if not model.kernels_fitted:
                model.fit_kernels(x, f, m)
            opt.zero_grad()
            try:
                pred = model(x, f, m)
                loss = mse_loss(pred, y)
                loss.backward()
                opt.step()
            except FloatingPointError as exc:
                raise TrainingDiverged(f"divergence at epoch {epoch}, step {result.steps + 1}: {exc}") from exc
            result.steps += 1
            acc.add(pred.data, y)
        val_mse, val_mae = evaluate(model, ds, "val", cfg.batch_size, eval_stride)
        rows = [
            {"epoch": epoch, "split": "train", "mse": acc.mse, "mae": acc.mae},
            {"epoch": epoch, "split": "val", "mse": val_mse, "mae": val_mae},
        ]
        result.history.extend(rows)
        if out is not None:
            write_metrics_csv(out / "metrics.csv", result.history)
        log.info("epoch %d train_mse=%.4f val_mse=%.4f", epoch, acc.mse, val_mse)
        if on_epoch is not None:
            on_epoch(rows[-1])
        if val_mse < result.best_val_mse:
            result.best_val_mse, result.best_epoch, stale = val_mse, epoch, 0
            best_state = {k: v.copy() for k, v in model.state_dict().items()}
            if out is not None:
                save_model(out / "checkpoint", model, ds, {"epoch": epoch, "val_mse": val_mse})
        else:
            stale += 1
            if stale >= cfg.patience:
                log.info("early stop after epoch %d", epoch)
                break

    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    return result
