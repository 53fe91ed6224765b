"""Versioned binary model files.

Layout, all integers little-endian unsigned 64-bit:

    bytes 0..15   magic tag b"CELLCASTMODEL\\x00\\x00\\x00"
    bytes 16..23  format version
    bytes 24..31  header length in bytes
    header        UTF-8 JSON with sorted keys: train_config, lma_config
                  (or null), epoch_nll, and an ordered array manifest of
                  {name, shape} entries
    payload       the manifest's arrays, concatenated as little-endian
                  float64 in C order

Nothing in the file depends on time or environment, so saving the same model
twice produces identical bytes, and a load followed by a save is a no-op at
the byte level.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..lma import LmaConfig
from .params import LayerParams, NetworkParams
from .training import MODEL_FORMAT_VERSION, TrainConfig, TrainedModel

__all__ = ["MODEL_FORMAT_VERSION", "ModelStoreError", "load_model", "save_model"]

MAGIC = b"CELLCASTMODEL\x00\x00\x00"


class ModelStoreError(ValueError):
    """Unreadable, corrupt, or version-incompatible model file."""


def _array_manifest(params: NetworkParams) -> list[tuple[str, np.ndarray]]:
    entries: list[tuple[str, np.ndarray]] = []
    for idx, layer in enumerate(params.layers):
        entries.append((f"layer{idx}.wx", layer.wx))
        entries.append((f"layer{idx}.wh", layer.wh))
        entries.append((f"layer{idx}.b", layer.b))
    entries.append(("head_w", params.head_w))
    entries.append(("head_b", params.head_b))
    return entries


def save_model(model: TrainedModel, path: str) -> None:
    entries = _array_manifest(model.params)
    header = {
        "train_config": vars(model.train_config),
        "lma_config": vars(model.lma_config) if model.lma_config is not None else None,
        "epoch_nll": list(model.epoch_nll),
        "arrays": [{"name": name, "shape": list(a.shape)} for name, a in entries],
    }
    if header["lma_config"] is not None:
        header["lma_config"] = dict(header["lma_config"])
        header["lma_config"]["features"] = list(model.lma_config.features)
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", model.format_version))
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for _, a in entries:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ModelStoreError(f"truncated model file: short read in {what}")
    return data


def load_model(path: str) -> TrainedModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ModelStoreError(f"{path}: not a model file (bad magic tag)")
        (version,) = struct.unpack("<Q", _read_exact(fh, 8, "version field"))
        if version != MODEL_FORMAT_VERSION:
            raise ModelStoreError(
                f"{path}: unsupported model format version {version},"
                f" expected {MODEL_FORMAT_VERSION}"
            )
        (header_len,) = struct.unpack("<Q", _read_exact(fh, 8, "header length"))
        try:
            header = json.loads(_read_exact(fh, header_len, "header").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ModelStoreError(f"{path}: corrupt header: {exc}") from exc
        try:
            train_config = TrainConfig(**header["train_config"])
            lma_raw = header["lma_config"]
            lma_config = None
            if lma_raw is not None:
                lma_raw = dict(lma_raw)
                lma_raw["features"] = tuple(lma_raw["features"])
                lma_config = LmaConfig(**lma_raw)
            epoch_nll = tuple(float(v) for v in header["epoch_nll"])
            manifest = [(e["name"], tuple(int(d) for d in e["shape"])) for e in header["arrays"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelStoreError(f"{path}: corrupt header: {exc}") from exc
        arrays: dict[str, np.ndarray] = {}
        for name, shape in manifest:
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = _read_exact(fh, count * 8, f"array {name}")
            arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        if fh.read(1):
            raise ModelStoreError(f"{path}: corrupt model file: trailing bytes")
    try:
        layers = []
        idx = 0
        while f"layer{idx}.wx" in arrays:
            layers.append(
                LayerParams(
                    arrays.pop(f"layer{idx}.wx"),
                    arrays.pop(f"layer{idx}.wh"),
                    arrays.pop(f"layer{idx}.b"),
                )
            )
            idx += 1
        params = NetworkParams(tuple(layers), arrays.pop("head_w"), arrays.pop("head_b"))
        if arrays:
            raise ValueError(f"unexpected arrays in file: {sorted(arrays)}")
    except ValueError as exc:
        raise ModelStoreError(f"{path}: corrupt model file: {exc}") from exc
    return TrainedModel(
        params.freeze(), train_config, lma_config, epoch_nll, int(version)
    )
