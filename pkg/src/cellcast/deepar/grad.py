"""Window loss and exact gradients via backpropagation through time.

One training window of T observed values produces T recurrence steps under
teacher forcing: step t consumes the previous observed value (the step before
the window seeds the first lag; a window at the very start of a series gets a
zero seed lag) and is scored against the observed value at t.  The loss is
the mean Gaussian negative log-likelihood over the steps, computed on the
scaled series.

The batched path processes many windows at once and is the training hot
path; ``window_loss_and_grad`` is the single-window view of the same
computation and is what the finite-difference oracle exercises.
"""

from __future__ import annotations

import math

import numpy as np

from .network import DEFAULT_SIGMA_FLOOR, sigmoid, softplus
from .params import NetworkParams

__all__ = ["batch_loss_and_grad", "window_loss_and_grad"]


def _forward_batch(
    inputs: np.ndarray, params: NetworkParams
) -> tuple[np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    """Run the stacked recurrence over (B, L, D) inputs with full caches.

    Returns raw head outputs (mu, sigma pre-activation), each (B, L), plus
    the intermediate activations the backward pass needs.
    """
    n_batch, length, _ = inputs.shape
    n_layers = params.num_layers
    hidden = params.hidden_size
    h_all = np.zeros((length + 1, n_layers, n_batch, hidden))
    c_all = np.zeros((length + 1, n_layers, n_batch, hidden))
    gate_i = np.empty((length, n_layers, n_batch, hidden))
    gate_f = np.empty((length, n_layers, n_batch, hidden))
    gate_g = np.empty((length, n_layers, n_batch, hidden))
    gate_o = np.empty((length, n_layers, n_batch, hidden))
    tanh_c = np.empty((length, n_layers, n_batch, hidden))
    for t in range(length):
        x = inputs[:, t, :]
        for idx, layer in enumerate(params.layers):
            a = x @ layer.wx.T + h_all[t, idx] @ layer.wh.T + layer.b
            gi = sigmoid(a[:, :hidden])
            gf = sigmoid(a[:, hidden : 2 * hidden])
            gg = np.tanh(a[:, 2 * hidden : 3 * hidden])
            go = sigmoid(a[:, 3 * hidden :])
            c = gf * c_all[t, idx] + gi * gg
            tc = np.tanh(c)
            h = go * tc
            h_all[t + 1, idx] = h
            c_all[t + 1, idx] = c
            gate_i[t, idx] = gi
            gate_f[t, idx] = gf
            gate_g[t, idx] = gg
            gate_o[t, idx] = go
            tanh_c[t, idx] = tc
            x = h
    top_h = h_all[1:, n_layers - 1].transpose(1, 0, 2)
    raw = top_h @ params.head_w.T + params.head_b
    caches = {
        "h_all": h_all,
        "c_all": c_all,
        "gate_i": gate_i,
        "gate_f": gate_f,
        "gate_g": gate_g,
        "gate_o": gate_o,
        "tanh_c": tanh_c,
        "top_h": top_h,
        "inputs": inputs,
    }
    return raw[:, :, 0], raw[:, :, 1], caches


def _backward_batch(
    d_mu: np.ndarray,
    d_spre: np.ndarray,
    params: NetworkParams,
    caches: dict[str, np.ndarray],
) -> NetworkParams:
    n_batch, length = d_mu.shape
    n_layers = params.num_layers
    hidden = params.hidden_size
    h_all = caches["h_all"]
    c_all = caches["c_all"]
    gate_i = caches["gate_i"]
    gate_f = caches["gate_f"]
    gate_g = caches["gate_g"]
    gate_o = caches["gate_o"]
    tanh_c = caches["tanh_c"]
    inputs = caches["inputs"]
    d_raw = np.stack([d_mu, d_spre], axis=2)
    d_head_w = np.einsum("btr,bth->rh", d_raw, caches["top_h"])
    d_head_b = d_raw.sum(axis=(0, 1))
    d_top = d_raw @ params.head_w
    d_wx = [np.zeros_like(layer.wx) for layer in params.layers]
    d_wh = [np.zeros_like(layer.wh) for layer in params.layers]
    d_b = [np.zeros_like(layer.b) for layer in params.layers]
    dh_next = np.zeros((n_layers, n_batch, hidden))
    dc_next = np.zeros((n_layers, n_batch, hidden))
    da = np.empty((n_batch, 4 * hidden))
    for t in range(length - 1, -1, -1):
        dx_above: np.ndarray | None = None
        for idx in range(n_layers - 1, -1, -1):
            dh = dh_next[idx].copy()
            if idx == n_layers - 1:
                dh += d_top[:, t]
            if dx_above is not None:
                dh += dx_above
            gi = gate_i[t, idx]
            gf = gate_f[t, idx]
            gg = gate_g[t, idx]
            go = gate_o[t, idx]
            tc = tanh_c[t, idx]
            dct = dc_next[idx] + dh * go * (1.0 - tc * tc)
            da[:, :hidden] = dct * gg * gi * (1.0 - gi)
            da[:, hidden : 2 * hidden] = dct * c_all[t, idx] * gf * (1.0 - gf)
            da[:, 2 * hidden : 3 * hidden] = dct * gi * (1.0 - gg * gg)
            da[:, 3 * hidden :] = dh * tc * go * (1.0 - go)
            dc_next[idx] = dct * gf
            layer = params.layers[idx]
            x_in = inputs[:, t, :] if idx == 0 else h_all[t + 1, idx - 1]
            d_wx[idx] += da.T @ x_in
            d_wh[idx] += da.T @ h_all[t, idx]
            d_b[idx] += da.sum(axis=0)
            dh_next[idx] = da @ layer.wh
            dx_above = da @ layer.wx if idx > 0 else None
    arrays: list[np.ndarray] = []
    for idx in range(n_layers):
        arrays.extend((d_wx[idx], d_wh[idx], d_b[idx]))
    arrays.extend((d_head_w, d_head_b))
    return params.with_arrays(arrays)


def batch_loss_and_grad(
    z_windows: np.ndarray,
    x_windows: np.ndarray | None,
    scales: np.ndarray,
    params: NetworkParams,
    sigma_floor: float = DEFAULT_SIGMA_FLOOR,
) -> tuple[float, NetworkParams]:
    """Mean window loss over a batch and its gradient.

    z_windows is (B, T+1): a seed lag followed by T observed targets per
    window, in data units.  x_windows is (B, T, K) covariate rows aligned
    with the targets, or None for a covariate-free model.  scales holds the
    per-window scale applied to both lags and targets.
    """
    z_windows = np.asarray(z_windows, dtype=np.float64)
    scales = np.asarray(scales, dtype=np.float64)
    if z_windows.ndim != 2 or z_windows.shape[1] < 2:
        raise ValueError("z_windows must be (B, T+1) with T >= 1")
    n_batch, length = z_windows.shape[0], z_windows.shape[1] - 1
    if scales.shape != (n_batch,):
        raise ValueError(f"expected {n_batch} scales, got shape {scales.shape}")
    if not np.all(np.isfinite(z_windows)):
        raise ValueError("non-finite values in z_windows")
    if not (np.all(np.isfinite(scales)) and np.all(scales > 0)):
        raise ValueError("scales must be finite and positive")
    if sigma_floor <= 0.0:
        raise ValueError("sigma_floor must be positive")
    n_channels = params.input_size - 1
    lags = z_windows[:, :-1] / scales[:, None]
    targets = z_windows[:, 1:] / scales[:, None]
    if n_channels == 0:
        if x_windows is not None:
            raise ValueError("model takes no covariates but x_windows was given")
        inputs = lags[:, :, None]
    else:
        if x_windows is None:
            raise ValueError(f"model expects {n_channels} covariate channels, got none")
        x_windows = np.asarray(x_windows, dtype=np.float64)
        if x_windows.shape != (n_batch, length, n_channels):
            raise ValueError(
                f"expected covariates of shape ({n_batch}, {length}, {n_channels}),"
                f" got {x_windows.shape}"
            )
        if not np.all(np.isfinite(x_windows)):
            raise ValueError("non-finite covariate values")
        inputs = np.concatenate([lags[:, :, None], x_windows], axis=2)
    mu, s_pre, caches = _forward_batch(inputs, params)
    sigma = softplus(s_pre) + sigma_floor
    resid = targets - mu
    nll = 0.5 * np.log(2.0 * math.pi * sigma * sigma) + resid * resid / (
        2.0 * sigma * sigma
    )
    loss = float(np.mean(nll))
    inv_count = 1.0 / (n_batch * length)
    d_mu = (mu - targets) / (sigma * sigma) * inv_count
    d_sigma = (1.0 / sigma - resid * resid / sigma**3) * inv_count
    d_spre = d_sigma * sigmoid(s_pre)
    grads = _backward_batch(d_mu, d_spre, params, caches)
    return loss, grads


def window_loss_and_grad(
    z_window: np.ndarray,
    x_window: np.ndarray | None,
    params: NetworkParams,
    scale: float,
    sigma_floor: float = DEFAULT_SIGMA_FLOOR,
) -> tuple[float, NetworkParams]:
    """Loss and gradient for a single window.

    z_window is (T+1,): the seed lag then T observed targets; x_window is
    (T, K) or None; scale is this window's series scale.
    """
    z_window = np.asarray(z_window, dtype=np.float64)
    if z_window.ndim != 1 or z_window.size < 2:
        raise ValueError("z_window must be 1-D with at least two values")
    x_batch = None
    if x_window is not None:
        x_window = np.asarray(x_window, dtype=np.float64)
        if x_window.ndim != 2:
            raise ValueError("x_window must be (T, K)")
        x_batch = x_window[None, :, :]
    return batch_loss_and_grad(
        z_window[None, :], x_batch, np.array([float(scale)]), params, sigma_floor
    )
