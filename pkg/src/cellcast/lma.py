"""Local moving average (LMA) covariate channels.

Each output index of a series is assigned a window of past training data and
the window's summary statistic (mean or population standard deviation) is
emitted as an artificial feature channel.  Channels cover both the training
range and the prediction horizon, using training data only, so they can feed
the forecaster as covariates that are "known" at all time points.

Window placement for output index i (1-based), series length n, window length
w, horizon p (w >= p >= 1, w <= n):

    i < p              head:    window [1, w]
    p <= i < n, tail   tail:    window [n-w+1, n]      (tail when n-i-1 < p)
    p <= i < n, main   main:    window [i-p+1, i-p+w]  (start clamped to [1, n-w+1])
    i >= n             horizon: window [n-p+1, n]

so the head and horizon entries are constant runs and every window stays
inside the observed range.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .panel import SeriesPanel

__all__ = [
    "FEATURE_KINDS",
    "LmaConfig",
    "CovariatePanel",
    "feature_value",
    "lma_window",
    "lma_features",
    "build_covariates",
    "day_of_week_channel",
    "assemble_covariates",
    "export_covariates",
]

FEATURE_KINDS = ("mean", "std")


class LmaError(ValueError):
    """Invalid LMA configuration or window query."""


@dataclass(frozen=True)
class LmaConfig:
    """Feature channel recipe.

    ``window_len`` is the smoothing window over training data, ``horizon``
    the number of prediction steps the channels must extend past the series
    end.  ``features`` lists each kind at most once, in channel order.
    """

    window_len: int = 62
    horizon: int = 31
    features: tuple[str, ...] = ("mean", "std")
    standardize: bool = True

    def validate(self) -> None:
        if not (self.window_len >= self.horizon >= 1):
            raise LmaError(
                f"need window_len >= horizon >= 1, got window_len={self.window_len}, "
                f"horizon={self.horizon}"
            )
        if len(self.features) == 0:
            raise LmaError("features must be nonempty")
        for kind in self.features:
            if kind not in FEATURE_KINDS:
                raise LmaError(f"unknown feature kind {kind!r}, expected one of {FEATURE_KINDS}")
        if len(set(self.features)) != len(self.features):
            raise LmaError(f"duplicate feature kinds in {self.features}")

    @property
    def n_channels(self) -> int:
        return len(self.features)


def feature_value(window: np.ndarray, kind: str) -> float:
    """Summary statistic of a window: arithmetic mean or population std."""
    window = np.asarray(window, dtype=np.float64)
    if window.size == 0:
        raise LmaError("feature window is empty")
    if kind == "mean":
        return float(np.mean(window))
    if kind == "std":
        return float(np.std(window))
    raise LmaError(f"unknown feature kind {kind!r}")


def lma_window(i: int, n: int, window_len: int, horizon: int) -> tuple[int, int]:
    """Window (start, length), both 1-based/inclusive-start, for output index i.

    See the module docstring for the placement rules.  The returned window is
    always inside [1, n].
    """
    if not (window_len >= horizon >= 1):
        raise LmaError(f"need window_len >= horizon >= 1, got ({window_len}, {horizon})")
    if window_len > n:
        raise LmaError(f"window_len {window_len} exceeds series length {n}")
    if not (1 <= i <= n + horizon):
        raise LmaError(f"index {i} out of range 1..{n + horizon}")
    if i < horizon:
        return 1, window_len
    if i < n:
        if n - i - 1 < horizon:
            return n - window_len + 1, window_len
        start = min(max(i - horizon + 1, 1), n - window_len + 1)
        return start, window_len
    return n - horizon + 1, horizon


def lma_features(z: np.ndarray, cfg: LmaConfig) -> np.ndarray:
    """All feature channels for one series: shape (K, n + horizon)."""
    cfg.validate()
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.size == 0:
        raise LmaError(f"series must be a nonempty 1-D sequence, got shape {z.shape}")
    n = z.size
    if cfg.window_len > n:
        raise LmaError(f"window_len {cfg.window_len} exceeds series length {n}")
    out = np.empty((cfg.n_channels, n + cfg.horizon))
    for i in range(1, n + cfg.horizon + 1):
        start, length = lma_window(i, n, cfg.window_len, cfg.horizon)
        window = z[start - 1 : start - 1 + length]
        for k, kind in enumerate(cfg.features):
            out[k, i - 1] = feature_value(window, kind)
    return out


@dataclass(frozen=True)
class CovariatePanel:
    """Per-series covariate channels of length n + horizon.

    ``channels[i, k, t]`` is channel k of series i at step t+1.  When built
    with standardization, ``shift``/``scale`` record the training-range mean
    and population std each channel was normalized by (scale 1 where the
    channel had zero variance).
    """

    series_ids: tuple[str, ...]
    kinds: tuple[str, ...]
    horizon: int
    channels: np.ndarray
    shift: np.ndarray | None = None
    scale: np.ndarray | None = None

    def __post_init__(self) -> None:
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim != 3:
            raise LmaError(f"channels must be (series, channel, step), got shape {ch.shape}")
        n_series, k, length = ch.shape
        if n_series != len(self.series_ids):
            raise LmaError(f"{len(self.series_ids)} series ids but {n_series} channel rows")
        if k != len(self.kinds):
            raise LmaError(f"{len(self.kinds)} kind labels but {k} channels")
        if not (1 <= self.horizon < length):
            raise LmaError(f"horizon {self.horizon} inconsistent with channel length {length}")
        if not np.all(np.isfinite(ch)):
            raise LmaError("covariate channels contain non-finite values")
        ch = ch.copy()
        ch.setflags(write=False)
        object.__setattr__(self, "channels", ch)

    @property
    def n_channels(self) -> int:
        return self.channels.shape[1]

    @property
    def n_train_steps(self) -> int:
        return self.channels.shape[2] - self.horizon


def build_covariates(panel: SeriesPanel, cfg: LmaConfig) -> CovariatePanel:
    """LMA channels for every series of a panel.

    With ``cfg.standardize`` each channel is shifted and scaled by its own
    training-range (first n steps) mean and population std, per series; a
    zero-variance channel is shifted to zero and left unscaled.
    """
    cfg.validate()
    n = panel.n_steps
    raw = np.stack([lma_features(panel.values[i], cfg) for i in range(panel.n_series)])
    if not cfg.standardize:
        return CovariatePanel(panel.series_ids, cfg.features, cfg.horizon, raw)
    shift = raw[:, :, :n].mean(axis=2)
    scale = raw[:, :, :n].std(axis=2)
    scale = np.where(scale == 0.0, 1.0, scale)
    normalized = (raw - shift[:, :, None]) / scale[:, :, None]
    return CovariatePanel(panel.series_ids, cfg.features, cfg.horizon, normalized, shift, scale)


def day_of_week_channel(start_date: dt.date, n_steps: int, horizon: int) -> np.ndarray:
    """Calendar channel: weekday index centered and scaled to [-1, 1]."""
    first = start_date.weekday()
    dow = (first + np.arange(n_steps + horizon)) % 7
    return (dow - 3.0) / 3.0


def assemble_covariates(
    panel: SeriesPanel,
    lma_cfg: LmaConfig | None,
    horizon: int,
    day_of_week: bool = False,
) -> CovariatePanel | None:
    """Covariates the forecaster trains on: LMA channels, optional calendar channel, or none.

    ``horizon`` must match ``lma_cfg.horizon`` when LMA channels are used.
    Returns None when the model runs on the lagged target alone.
    """
    parts: list[np.ndarray] = []
    kinds: list[str] = []
    shift = scale = None
    if lma_cfg is not None:
        if lma_cfg.horizon != horizon:
            raise LmaError(f"lma horizon {lma_cfg.horizon} != requested horizon {horizon}")
        cov = build_covariates(panel, lma_cfg)
        parts.append(np.asarray(cov.channels))
        kinds.extend(cov.kinds)
        shift, scale = cov.shift, cov.scale
    if day_of_week:
        dow = day_of_week_channel(panel.start_date, panel.n_steps, horizon)
        parts.append(np.broadcast_to(dow, (panel.n_series, 1, dow.size)).copy())
        kinds.append("dow")
    if not parts:
        return None
    return CovariatePanel(
        panel.series_ids, tuple(kinds), horizon, np.concatenate(parts, axis=1), shift, scale
    )


def export_covariates(cov: CovariatePanel, path: str) -> None:
    """Inspection CSV: ``series_id,channel,t,value`` with t 1-based."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("series_id,channel,t,value\n")
        length = cov.channels.shape[2]
        for i, sid in enumerate(cov.series_ids):
            for k, kind in enumerate(cov.kinds):
                for t in range(length):
                    fh.write(f"{sid},{kind},{t + 1},{float(cov.channels[i, k, t])!r}\n")
