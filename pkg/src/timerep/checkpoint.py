"""Model checkpoint container: a JSON header followed by a binary blob.

Layout::

    bytes 0..7    magic b"TREPCKP1"
    bytes 8..11   header length N, uint32 little-endian
    bytes 12..    UTF-8 JSON header of length N
    remainder     concatenated little-endian float32 arrays, C order

The header carries the model config, the feature normalization, free-form
metadata, and an array table with name/shape/offset for both the final
("param/") and initial ("init/") parameter snapshots.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .models import ModelConfig, build_model

MAGIC = b"TREPCKP1"


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    initial_params: dict[str, np.ndarray]
    feature_mean: np.ndarray
    feature_std: np.ndarray
    meta: dict = field(default_factory=dict)

    def build(self, initial: bool = False):
        """Instantiate the model with this checkpoint's parameters."""
        model = build_model(self.config)
        model.load_param_values(self.initial_params if initial else self.params)
        return model


def _array_table(groups: dict[str, dict[str, np.ndarray]]):
    table = []
    blobs = []
    offset = 0
    for prefix, arrays in groups.items():
        for name in sorted(arrays):
            arr = np.ascontiguousarray(arrays[name], dtype="<f4")
            table.append(
                {
                    "name": f"{prefix}/{name}",
                    "shape": list(arr.shape),
                    "offset": offset,
                    "nbytes": arr.nbytes,
                }
            )
            blobs.append(arr.tobytes())
            offset += arr.nbytes
    return table, b"".join(blobs)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    table, blob = _array_table(
        {"param": ckpt.params, "init": ckpt.initial_params}
    )
    header = {
        "format_version": 1,
        "config": dataclasses.asdict(ckpt.config),
        "feature_mean": np.asarray(ckpt.feature_mean, dtype=np.float64).tolist(),
        "feature_std": np.asarray(ckpt.feature_std, dtype=np.float64).tolist(),
        "meta": ckpt.meta,
        "arrays": table,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a timerep checkpoint (bad magic {magic!r})")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        blob = fh.read()
    params: dict[str, np.ndarray] = {}
    initial: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        raw = blob[entry["offset"] : entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype="<f4").reshape(entry["shape"]).astype(np.float64)
        prefix, name = entry["name"].split("/", 1)
        (params if prefix == "param" else initial)[name] = arr
    return Checkpoint(
        config=ModelConfig(**header["config"]),
        params=params,
        initial_params=initial,
        feature_mean=np.asarray(header["feature_mean"], dtype=np.float64),
        feature_std=np.asarray(header["feature_std"], dtype=np.float64),
        meta=header.get("meta", {}),
    )
