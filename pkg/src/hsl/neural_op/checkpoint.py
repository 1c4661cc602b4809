"""Versioned ``.npz`` checkpoints: JSON metadata plus one array per named section."""

from __future__ import annotations

import json

import numpy as np

from .operator import OperatorArch, OperatorParams, Standardization

FORMAT_VERSION = 1


def save_params(params: OperatorParams, path, extra: dict | None = None) -> None:
    meta = {
        "format_version": FORMAT_VERSION,
        "arch": params.arch.to_dict(),
        "standardization": params.norm.to_dict(),
        "sections": list(params.arch.shapes()),
        "extra": extra or {},
    }
    arrays = {f"param/{k}": np.asarray(v, dtype=float) for k, v in params.arrays.items()}
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_params(path) -> tuple[OperatorParams, dict]:
    """Returns the parameters and the ``extra`` metadata dict."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('format_version')}")
        arch = OperatorArch(**meta["arch"])
        arrays = {}
        for name, shape in arch.shapes().items():
            key = f"param/{name}"
            if key not in data:
                raise ValueError(f"checkpoint is missing section {name}")
            a = data[key]
            if a.shape != shape:
                raise ValueError(f"section {name} has shape {a.shape}, expected {shape}")
            arrays[name] = a.copy()
    return OperatorParams(arch, arrays, Standardization(**meta["standardization"])), meta["extra"]
