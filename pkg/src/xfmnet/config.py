"""Training and model hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class TrainConfig:
    """Defaults follow the reference configuration (k=2, three levels, d=16, ...).

    ``train_stride`` subsamples training windows: epoch ``e`` visits the
    windows whose start is ``e mod train_stride`` modulo ``train_stride``,
    so every window is still seen once per ``train_stride`` epochs.
    """

    # multiscale sampling and embeddings
    k: int = 2
    levels: int = 3
    d: int = 16
    image_features: int = 16
    encoder_hidden: int = 8
    radius: int = 2
    dropout: float = 0.1
    # decomposition
    window: int = 27
    stride: int = 1
    kernels: int = 8
    kernel_fit_windows: int = 4096
    # enhancement and fusion
    order: str = "season_up_trend_down"
    fusion: str = "xgf"
    rounds: int = 2
    d_ff: int = 16
    cross_heads: int = 2
    gate_heads: int = 4
    ffn_residual: bool = False
    # forecasting task
    lookback: int = 336
    horizon: int = 192
    season_period: int = 6
    # optimisation
    batch_size: int = 32
    lr: float = 1e-3
    epochs: int = 30
    patience: int = 10
    train_stride: int = 1
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise KeyError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**values)

    def updated(self, **changes) -> "TrainConfig":
        return replace(self, **changes)

    @property
    def level_lengths(self) -> list[int]:
        return [self.lookback // self.k**l for l in range(self.levels + 1)]

    def validate(self) -> None:
        if self.k < 1 or self.levels < 0:
            raise ValueError("k must be >= 1 and levels >= 0")
        if self.lookback % self.k**self.levels:
            raise ValueError(f"lookback {self.lookback} is not divisible by k**levels = {self.k**self.levels}")
        coarsest = self.level_lengths[-1]
        if self.window > coarsest:
            raise ValueError(f"decomposition window {self.window} exceeds the coarsest level length {coarsest}")
        if self.stride > self.window:
            raise ValueError("decomposition stride must not exceed the window")
        if self.kernels > self.d:
            raise ValueError(f"kernels={self.kernels} exceeds d={self.d}")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.d % 2:
            raise ValueError("d must be even for the positional encoding")
        if self.train_stride < 1 or self.batch_size < 1:
            raise ValueError("train_stride and batch_size must be positive")
