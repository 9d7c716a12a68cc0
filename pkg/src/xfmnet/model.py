"""The full forecaster: embed, decompose, enhance, fuse recursively, predict."""

from __future__ import annotations

import numpy as np

from .config import TrainConfig
from .embedding import EarlyFusion, ImageEmbedding, ImageEncoder, SeriesEmbedding, align_marks, multiscale
from .enhancement import EnhancementStack
from .loctrend import KernelBank, decompose, init_kernels
from .loctrend import window_starts as loctrend_window_starts
from .numerics import Linear, Module, Tensor, no_grad
from .prediction import ForecastHead, predict
from .xgatefusion import FusionLevel, recursive_fuse

STREAMS = ("temp", "img", "con")


class XFMNet(Module):
    """Multimodal multiscale forecaster.

    Parameters
    ----------
    cfg : TrainConfig
        Hyperparameters; validated on construction.
    n_stations : int
        Number of series ``M``.
    channels : int
        Image channels ``C``.
    rng : numpy.random.Generator, optional
        Initialisation stream; defaults to one seeded by ``cfg.seed``.
    """

    def __init__(self, cfg: TrainConfig, n_stations: int, channels: int, rng: np.random.Generator | None = None):
        cfg.validate()
        rng = rng if rng is not None else np.random.default_rng(cfg.seed)
        self.cfg = cfg
        d, lengths = cfg.d, cfg.level_lengths
        self.encoder = ImageEncoder(rng, channels, cfg.image_features, cfg.encoder_hidden)
        self.image_proj = Linear(rng, cfg.image_features, d)
        self.series_embedding = SeriesEmbedding(rng, n_stations, d, cfg.dropout)
        self.image_embedding = ImageEmbedding(rng, d, cfg.radius)
        self.early = EarlyFusion(rng, d)
        self.banks = {s: [KernelBank.placeholder(cfg.kernels, d) for _ in lengths] for s in STREAMS}
        self.enhance = {s: EnhancementStack(rng, lengths, d, cfg.k, cfg.order) for s in STREAMS}
        self.fusion = [
            FusionLevel(rng, d, cfg.d_ff, cfg.cross_heads, cfg.gate_heads, cfg.fusion, cfg.ffn_residual)
            for _ in lengths
        ]
        self.heads = [ForecastHead(rng, T_l, cfg.horizon, d, n_stations) for T_l in lengths]
        self._fitted = False

    # -- stages --------------------------------------------------------------

    def embed(self, x, frames, marks) -> list[list[Tensor]]:
        """Per-level ``[F_temp, F_img, F_con]`` for inputs ``x [B, L, M]``, ``frames [B, L, C, H, W]``."""
        cfg = self.cfg
        x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))
        frames = frames if isinstance(frames, Tensor) else Tensor(np.asarray(frames, dtype=np.float32))
        if x.shape[-2] != cfg.lookback or frames.shape[-4] != cfg.lookback:
            raise ValueError(f"inputs must span the lookback of {cfg.lookback} steps")
        xs = multiscale(x, cfg.k, cfg.levels, axis=-2)
        feats = multiscale(self.encoder(frames), cfg.k, cfg.levels, axis=-2)
        out = []
        for l in range(cfg.levels + 1):
            m = align_marks(np.asarray(marks), cfg.k, l)
            f_temp = self.series_embedding(xs[l], m)
            f_img = self.image_embedding(self.image_proj(feats[l]), m)
            out.append([f_temp, f_img, self.early(f_temp, f_img)])
        return out

    def g(self, feed: list[list[Tensor]], probes: list[dict] | None = None) -> list[Tensor]:
        """One decompose, enhance and fuse pass over all levels jointly."""
        cfg = self.cfg
        seasonal, trend = {}, {}
        for j, s in enumerate(STREAMS):
            parts = [decompose(feed[l][j], self.banks[s][l], cfg.window, cfg.stride) for l in range(len(feed))]
            seasonal[s] = self.enhance[s].seasonal_bottom_up([p.seasonal for p in parts])
            trend[s] = self.enhance[s].trend_top_down([p.trend for p in parts])
        return [
            self.fusion[l](
                [seasonal[s][l] for s in STREAMS],
                [trend[s][l] for s in STREAMS],
                probes=None if probes is None else probes[l],
            )
            for l in range(len(feed))
        ]

    def fuse(self, anchor: list[list[Tensor]], probes: list[dict] | None = None) -> list[Tensor]:
        if not self._fitted:
            raise RuntimeError("kernel banks are not initialised; call fit_kernels on a training batch first")
        return recursive_fuse(anchor, self.cfg.rounds, lambda feed: self.g(feed, probes), self.refine)

    def refine(self, level: int, z: Tensor) -> Tensor:
        return self.fusion[level].refine(z)

    def __call__(self, x, frames, marks, probes: list[dict] | None = None) -> Tensor:
        """Forecast ``[B, M, horizon]``. ``probes``, if given, is filled with one dict per level."""
        if probes is not None:
            probes.clear()
            probes.extend({} for _ in range(self.cfg.levels + 1))
        z_hats = self.fuse(self.embed(x, frames, marks), probes)
        return predict(z_hats, self.heads)

    # -- kernel banks ----------------------------------------------------------

    def fit_kernels(self, x, frames, marks) -> None:
        """Fit every (stream, level) bank on one batch's embedded windows, then freeze."""
        cfg = self.cfg
        was_training = self.training
        self.eval()
        with no_grad():
            anchor = self.embed(x, frames, marks)
        self.train(was_training)
        for j, s in enumerate(STREAMS):
            for l in range(len(anchor)):
                F = anchor[l][j].data.reshape(-1, *anchor[l][j].shape[-2:])
                starts = loctrend_window_starts(F.shape[1], cfg.window, cfg.stride)
                idx = starts[:, None] + np.arange(cfg.window)
                windows = F[:, idx, :].reshape(-1, cfg.window, cfg.d)
                if len(windows) > cfg.kernel_fit_windows:
                    keep = np.linspace(0, len(windows) - 1, cfg.kernel_fit_windows).astype(np.int64)
                    windows = windows[keep]
                self.banks[s][l] = init_kernels(windows.astype(np.float64), cfg.kernels)
        self._fitted = True

    @property
    def kernels_fitted(self) -> bool:
        return self._fitted

    def mark_kernels_fitted(self) -> None:
        """Used after loading banks from a checkpoint."""
        self._fitted = True
