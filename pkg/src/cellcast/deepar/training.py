"""Maximum-likelihood training over sampled panel windows.

Each epoch draws ``windows_per_series`` training windows per series at seeded
random offsets, pools them across series, visits them in a seeded-shuffled
order, and applies one Adam update per batch of windows.  Every window spans
``context_length + horizon`` observed values under teacher forcing; its scale
comes from its own conditioning range.  The whole procedure is a pure
function of (panel, covariates, config), so reruns are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._rng import substream
from ..lma import CovariatePanel, LmaConfig
from ..panel import SeriesPanel
from .grad import batch_loss_and_grad
from .params import NetworkParams, init_params

__all__ = ["MODEL_FORMAT_VERSION", "TrainConfig", "TrainedModel", "TrainError", "train"]

MODEL_FORMAT_VERSION = 1

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

_INIT_STREAM = 0
_OFFSET_STREAM = 1
_SHUFFLE_STREAM = 2


class TrainError(ValueError):
    """Invalid training configuration or unusable training inputs."""


@dataclass(frozen=True)
class TrainConfig:
    context_length: int = 62
    horizon: int = 31
    epochs: int = 15
    learning_rate: float = 1e-3
    batch_size: int = 32
    hidden_size: int = 40
    num_layers: int = 2
    sigma_floor: float = 1e-6
    seed: int = 0
    windows_per_series: int = 64
    clip_norm: float = 10.0
    day_of_week: bool = False

    def validate(self) -> None:
        if self.horizon < 1 or self.context_length < self.horizon:
            raise TrainError(
                f"need context_length >= horizon >= 1, got {self.context_length}, {self.horizon}"
            )
        if self.epochs < 0:
            raise TrainError(f"epochs must be >= 0, got {self.epochs}")
        if not self.learning_rate > 0:
            raise TrainError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise TrainError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.hidden_size < 1 or self.num_layers < 1:
            raise TrainError(
                f"hidden_size and num_layers must be >= 1, got {self.hidden_size}, {self.num_layers}"
            )
        if not self.sigma_floor > 0:
            raise TrainError(f"sigma_floor must be positive, got {self.sigma_floor}")
        if self.windows_per_series < 1:
            raise TrainError(f"windows_per_series must be >= 1, got {self.windows_per_series}")
        if not self.clip_norm > 0:
            raise TrainError(f"clip_norm must be positive, got {self.clip_norm}")

    @property
    def window_len(self) -> int:
        return self.context_length + self.horizon


@dataclass(frozen=True)
class TrainedModel:
    """Immutable training result: parameters, configs and the loss curve."""

    params: NetworkParams
    train_config: TrainConfig
    lma_config: LmaConfig | None
    epoch_nll: tuple[float, ...]
    format_version: int = MODEL_FORMAT_VERSION

    def __post_init__(self) -> None:
        object.__setattr__(self, "epoch_nll", tuple(float(v) for v in self.epoch_nll))

    @property
    def n_channels(self) -> int:
        return self.params.input_size - 1


def _check_covariates(
    panel: SeriesPanel, covariates: CovariatePanel | None, cfg: TrainConfig
) -> int:
    if covariates is None:
        return 0
    if covariates.series_ids != panel.series_ids:
        raise TrainError("covariate series ids do not match the panel")
    if covariates.horizon != cfg.horizon:
        raise TrainError(
            f"covariates built for horizon {covariates.horizon}, config wants {cfg.horizon}"
        )
    if covariates.n_train_steps != panel.n_steps:
        raise TrainError(
            f"covariates cover {covariates.n_train_steps} steps, panel has {panel.n_steps}"
        )
    return covariates.n_channels


def _clip_gradient(g: np.ndarray, clip_norm: float) -> np.ndarray:
    norm = float(np.sqrt(np.sum(g * g)))
    if norm > clip_norm:
        return g * (clip_norm / norm)
    return g


def train(
    panel: SeriesPanel,
    covariates: CovariatePanel | None,
    cfg: TrainConfig,
    lma_config: LmaConfig | None = None,
) -> TrainedModel:
    """Fit the network on every series of the panel.

    covariates must align with the panel (same series, same horizon) or be
    None for a model that runs on the lagged target alone.  lma_config is
    carried into the result so a reloaded model can rebuild its channels.
    """
    cfg.validate()
    if lma_config is not None:
        lma_config.validate()
        if covariates is None:
            raise TrainError("lma_config given but no covariates")
    window_len = cfg.window_len
    n_steps = panel.n_steps
    if n_steps < window_len:
        raise TrainError(
            f"series length {n_steps} is shorter than one training window ({window_len})"
        )
    n_channels = _check_covariates(panel, covariates, cfg)
    rng_init = substream(cfg.seed, _INIT_STREAM)
    params = init_params(1 + n_channels, cfg.hidden_size, cfg.num_layers, rng_init)
    if cfg.epochs == 0:
        return TrainedModel(params.freeze(), cfg, lma_config, ())
    rng_offsets = substream(cfg.seed, _OFFSET_STREAM)
    rng_shuffle = substream(cfg.seed, _SHUFFLE_STREAM)

    values = panel.values
    n_series = panel.n_series
    wps = cfg.windows_per_series
    n_windows = n_series * wps
    channels = covariates.channels if covariates is not None else None

    theta = params.to_vector()
    adam_m = np.zeros_like(theta)
    adam_v = np.zeros_like(theta)
    step = 0
    epoch_nll: list[float] = []
    for _epoch in range(cfg.epochs):
        offsets = rng_offsets.integers(0, n_steps - window_len + 1, size=n_windows)
        order = rng_shuffle.permutation(n_windows)
        loss_sum = 0.0
        for lo in range(0, n_windows, cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            n_batch = batch.size
            z_windows = np.empty((n_batch, window_len + 1))
            scales = np.empty(n_batch)
            x_windows = (
                np.empty((n_batch, window_len, n_channels)) if n_channels else None
            )
            for row, j in enumerate(batch):
                sid = j // wps
                start = int(offsets[j])
                z_windows[row, 0] = values[sid, start - 1] if start > 0 else 0.0
                z_windows[row, 1:] = values[sid, start : start + window_len]
                scales[row] = 1.0 + float(
                    np.mean(values[sid, start : start + cfg.context_length])
                )
                if x_windows is not None:
                    x_windows[row] = channels[sid, :, start : start + window_len].T
            par = params.from_vector(theta)
            loss, grads = batch_loss_and_grad(
                z_windows, x_windows, scales, par, cfg.sigma_floor
            )
            loss_sum += loss * n_batch
            g = _clip_gradient(grads.to_vector(), cfg.clip_norm)
            step += 1
            adam_m = ADAM_BETA1 * adam_m + (1.0 - ADAM_BETA1) * g
            adam_v = ADAM_BETA2 * adam_v + (1.0 - ADAM_BETA2) * g * g
            m_hat = adam_m / (1.0 - ADAM_BETA1**step)
            v_hat = adam_v / (1.0 - ADAM_BETA2**step)
            theta = theta - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        epoch_nll.append(loss_sum / n_windows)
    final = params.from_vector(theta).freeze()
    return TrainedModel(final, cfg, lma_config, tuple(epoch_nll))
