"""JSON checkpoint container.

Layout (version 1)::

    {
      "format": "iterfilter-checkpoint",
      "version": 1,
      "model_config": {...},
      "config": {...},              # free-form run config snapshot
      "params": [{"name": str, "shape": [int, ...], "data": [float, ...]}, ...]
    }

Floats are written with ``repr`` precision, so a save/load round trip is exact
and identical parameters always serialize to identical bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import FormatError

FORMAT = "iterfilter-checkpoint"
VERSION = 1


def dumps(model, config=None) -> str:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "model_config": model.config.to_dict(),
        "config": config or {},
        "params": [{"name": name, "shape": list(p.shape), "data": p.data.ravel().tolist()}
                   for name, p in model.named_parameters()],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def save(path, model, config=None) -> None:
    Path(path).write_text(dumps(model, config), encoding="utf-8")


def loads(text: str, source=None):
    from ..filter.model import ModelConfig, init_model

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e.msg}", source, e.lineno) from None
    if doc.get("format") != FORMAT:
        raise FormatError("not an iterfilter checkpoint", source)
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported checkpoint version {doc.get('version')}", source)
    model = init_model(ModelConfig(**doc["model_config"]), seed=0)
    named = dict(model.named_parameters())
    blocks = {b["name"]: b for b in doc["params"]}
    if set(blocks) != set(named):
        missing = sorted(set(named) ^ set(blocks))
        raise FormatError(f"parameter names do not match model: {missing[:5]}", source)
    for name, p in named.items():
        b = blocks[name]
        data = np.asarray(b["data"], dtype=np.float64)
        if tuple(b["shape"]) != p.shape or data.size != p.data.size:
            raise FormatError(f"shape mismatch for {name}", source)
        p.data[...] = data.reshape(p.shape)
    return model, doc.get("config", {})


def load(path):
    return loads(Path(path).read_text(encoding="utf-8"), source=str(path))
