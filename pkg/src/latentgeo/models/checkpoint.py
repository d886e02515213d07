"""Checkpoint files.

Layout: one ASCII line ``LGCK1 <json header>\\n`` followed by one LGT1 record
per parameter. The header lists the model config and the parameter names in
canonical order (model parameters in construction order, then the optional
interpolation MLP's ``interp.*`` parameters).
"""

from __future__ import annotations

import json
import os

import numpy as np

from .. import ndkernel as nk
from .gvae import GvaeModel
from .vae import VaeModel

MAGIC = "LGCK1"


class CheckpointError(ValueError):
    pass


def build_model(config: dict):
    cfg = dict(config)
    kind = cfg.pop("kind")
    if kind == "vae":
        return VaeModel(**cfg)
    if kind == "gvae":
        return GvaeModel(**cfg)
    raise CheckpointError(f"unknown model kind {kind!r}")


def save_checkpoint(path, model, interp_mlp=None, extra: dict | None = None) -> None:
    named = list(model.p.params.items())
    if interp_mlp is not None:
        named += list(interp_mlp.p.params.items())
    header = {
        "model": model.config(),
        "interp_mlp": None if interp_mlp is None else interp_mlp.config(),
        "params": [[k, list(v.shape)] for k, v in named],
        "extra": extra or {},
    }
    line = f"{MAGIC} {json.dumps(header, sort_keys=True)}\n"
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(line.encode("ascii"))
        for _, v in named:
            nk.write_tensor(fh, v.data)
    os.replace(tmp, path)


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        return _header(fh)


def _header(fh) -> dict:
    line = fh.readline()
    if not line.startswith(MAGIC.encode() + b" "):
        raise CheckpointError(f"not a checkpoint (missing {MAGIC} header)")
    try:
        return json.loads(line[len(MAGIC) + 1 :].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint header: {e}") from None


def load_checkpoint(path):
    """Return ``(model, interp_mlp or None, header)``."""
    from ..iat import InterpMlp

    with open(path, "rb") as fh:
        header = _header(fh)
        model = build_model(header["model"])
        mlp = None if header["interp_mlp"] is None else InterpMlp(**header["interp_mlp"])
        state = {}
        for name, shape in header["params"]:
            try:
                arr = nk.read_tensor(fh)
            except nk.MalformedTensorError as e:
                raise CheckpointError(f"{name}: {e}") from None
            if list(arr.shape) != shape:
                raise CheckpointError(f"{name}: header shape {shape}, payload {list(arr.shape)}")
            state[name] = arr
        if fh.read(1):
            raise CheckpointError("trailing bytes after last parameter")
    expected = model.p.names() + ([] if mlp is None else mlp.p.names())
    if [n for n, _ in header["params"]] != expected:
        raise CheckpointError("parameter list does not match the canonical order for this config")
    model.p.load_state(state)
    if mlp is not None:
        mlp.p.load_state(state)
    return model, mlp, header


def same_parameters(a, b) -> bool:
    sa, sb = a.p.state(), b.p.state()
    return sa.keys() == sb.keys() and all(np.array_equal(sa[k], sb[k]) for k in sa)
