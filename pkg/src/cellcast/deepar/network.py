"""Forward recurrence and Gaussian likelihood head.

The model consumes, at each step t, the previous target scaled by the series
scale together with that step's covariate column, runs it through the stacked
recurrent layers, and maps the top hidden vector to a location and a positive
spread.  Everything here is deterministic; sampling lives in forecasting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import LayerParams, NetworkParams

__all__ = [
    "HiddenState",
    "LikelihoodParams",
    "forward_window",
    "gaussian_nll",
    "lstm_cell",
    "series_scale",
    "sigmoid",
    "softplus",
]

DEFAULT_SIGMA_FLOOR = 1e-6


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)) without overflow for large x."""
    return np.logaddexp(0.0, np.asarray(x, dtype=np.float64))


@dataclass(frozen=True)
class LikelihoodParams:
    mu: float
    sigma: float

    def __post_init__(self) -> None:
        mu = float(self.mu)
        sigma = float(self.sigma)
        if not (math.isfinite(mu) and math.isfinite(sigma)):
            raise ValueError("likelihood parameters must be finite")
        if sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True)
class HiddenState:
    """Stacked hidden and cell vectors, one row per layer."""

    h: np.ndarray
    c: np.ndarray

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=np.float64)
        c = np.asarray(self.c, dtype=np.float64)
        if h.ndim != 2 or h.shape != c.shape:
            raise ValueError(f"state arrays must share a (layers, hidden) shape, got {h.shape} and {c.shape}")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(c))):
            raise ValueError("non-finite values in hidden state")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "c", c)

    @classmethod
    def zeros(cls, num_layers: int, hidden_size: int) -> "HiddenState":
        return cls(np.zeros((num_layers, hidden_size)), np.zeros((num_layers, hidden_size)))


def lstm_cell(
    x: np.ndarray, state: tuple[np.ndarray, np.ndarray], layer: LayerParams
) -> tuple[np.ndarray, np.ndarray]:
    """One gated update of a single layer.

    Gate pre-activations are stacked in ``layer`` as four blocks of
    hidden_size rows in the order input, forget, candidate, output.
    """
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(state[0], dtype=np.float64)
    c_prev = np.asarray(state[1], dtype=np.float64)
    hs = layer.hidden_size
    if x.shape != (layer.input_size,):
        raise ValueError(f"expected input shape ({layer.input_size},), got {x.shape}")
    if h_prev.shape != (hs,) or c_prev.shape != (hs,):
        raise ValueError(f"expected state shape ({hs},), got {h_prev.shape} and {c_prev.shape}")
    a = layer.wx @ x + layer.wh @ h_prev + layer.b
    gi = sigmoid(a[:hs])
    gf = sigmoid(a[hs : 2 * hs])
    gg = np.tanh(a[2 * hs : 3 * hs])
    go = sigmoid(a[3 * hs :])
    c = gf * c_prev + gi * gg
    h = go * np.tanh(c)
    return h, c


def _step(
    x: np.ndarray, state: HiddenState, params: NetworkParams
) -> tuple[HiddenState, np.ndarray]:
    """Advance every layer one step; the top hidden vector feeds the head."""
    h_rows = np.empty_like(state.h)
    c_rows = np.empty_like(state.c)
    layer_input = x
    for idx, layer in enumerate(params.layers):
        h, c = lstm_cell(layer_input, (state.h[idx], state.c[idx]), layer)
        h_rows[idx] = h
        c_rows[idx] = c
        layer_input = h
    return HiddenState(h_rows, c_rows), layer_input


def _head(
    top_h: np.ndarray, params: NetworkParams, sigma_floor: float
) -> LikelihoodParams:
    raw = params.head_w @ top_h + params.head_b
    return LikelihoodParams(float(raw[0]), float(softplus(raw[1])) + sigma_floor)


def series_scale(conditioning: np.ndarray) -> float:
    """Per-series scale applied to model inputs: 1 + mean of the conditioning range."""
    values = np.asarray(conditioning, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("conditioning range must be a nonempty 1-D sequence")
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite values in conditioning range")
    if np.any(values < 0):
        raise ValueError("negative values in conditioning range")
    return 1.0 + float(np.mean(values))


def gaussian_nll(z: float, theta: LikelihoodParams, scale: float) -> float:
    """Negative log density of z/scale under Normal(mu, sigma)."""
    z = float(z)
    scale = float(scale)
    if not math.isfinite(z):
        raise ValueError("target value must be finite")
    if not (math.isfinite(scale) and scale > 0.0):
        raise ValueError(f"scale must be positive and finite, got {scale}")
    if theta.sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {theta.sigma}")
    resid = z / scale - theta.mu
    return 0.5 * math.log(2.0 * math.pi * theta.sigma**2) + resid**2 / (
        2.0 * theta.sigma**2
    )


def forward_window(
    z_lags: np.ndarray,
    x_window: np.ndarray | None,
    params: NetworkParams,
    scale: float,
    sigma_floor: float = DEFAULT_SIGMA_FLOOR,
) -> tuple[list[LikelihoodParams], HiddenState]:
    """Deterministic pass over one window, starting from the all-zero state.

    z_lags holds the lagged targets in data units, one per step; x_window is
    (L, K) covariate rows aligned with the steps, or None when the model runs
    without covariate channels.  Returns the per-step likelihood parameters
    and the final stacked state.
    """
    z_lags = np.asarray(z_lags, dtype=np.float64)
    if z_lags.ndim != 1 or z_lags.size == 0:
        raise ValueError("z_lags must be a nonempty 1-D sequence")
    if not np.all(np.isfinite(z_lags)):
        raise ValueError("non-finite lagged targets")
    if not (math.isfinite(scale) and scale > 0.0):
        raise ValueError(f"scale must be positive and finite, got {scale}")
    if sigma_floor <= 0.0:
        raise ValueError("sigma_floor must be positive")
    length = z_lags.size
    n_channels = params.input_size - 1
    if n_channels == 0:
        if x_window is not None:
            raise ValueError("model takes no covariates but x_window was given")
        inputs = (z_lags / scale)[:, None]
    else:
        if x_window is None:
            raise ValueError(f"model expects {n_channels} covariate channels, got none")
        x_window = np.asarray(x_window, dtype=np.float64)
        if x_window.shape != (length, n_channels):
            raise ValueError(
                f"expected covariates of shape ({length}, {n_channels}), got {x_window.shape}"
            )
        if not np.all(np.isfinite(x_window)):
            raise ValueError("non-finite covariate values")
        inputs = np.concatenate([(z_lags / scale)[:, None], x_window], axis=1)
    state = HiddenState.zeros(params.num_layers, params.hidden_size)
    outputs: list[LikelihoodParams] = []
    for t in range(length):
        state, top_h = _step(inputs[t], state, params)
        outputs.append(_head(top_h, params, sigma_floor))
    return outputs, state
