"""Checkpoint files: a NumPy ``.npz`` archive plus a JSON metadata entry.

Arrays are stored as raw float64 so a save/load round trip is bit-exact.
Layout::

    meta            JSON string: format version, tagger config, tag scheme,
                    vocabulary, optimizer step and (optionally) run config
    param/<name>    parameter matrices
    adam_m/<name>   first-moment accumulators   (optional)
    adam_v/<name>   second-moment accumulators  (optional)
"""

from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass

import numpy as np

from .data import Vocab
from .errors import CheckpointError
from .optim import OptimState
from .tagger import ModelParams, TaggerConfig
from .tagging import TagScheme

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    params: ModelParams
    vocab: Vocab
    scheme: TagScheme
    optim_state: OptimState | None = None
    run_config: dict | None = None


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    meta = {
        "format": "fmim-checkpoint",
        "version": FORMAT_VERSION,
        "tagger_config": ckpt.params.config.to_dict(),
        "scheme": ckpt.scheme.to_dict(),
        "vocab": ckpt.vocab.itos,
        "optim_step": None if ckpt.optim_state is None else ckpt.optim_state.t,
        "run_config": ckpt.run_config,
    }
    arrays = {"meta": np.array(json.dumps(meta))}
    for k, a in ckpt.params.items():
        arrays[f"param/{k}"] = a
    if ckpt.optim_state is not None:
        for k in ckpt.params:
            arrays[f"adam_m/{k}"] = ckpt.optim_state.m[k]
            arrays[f"adam_v/{k}"] = ckpt.optim_state.v[k]
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> Checkpoint:
    try:
        with np.load(path, allow_pickle=False) as z:
            data = {k: z[k] for k in z.files}
    except (OSError, ValueError, zipfile.BadZipFile) as exc:
        raise CheckpointError(f"{path} is not an fmim checkpoint: {exc}") from None
    if "meta" not in data:
        raise CheckpointError(f"{path} has no metadata entry")
    meta = json.loads(str(data["meta"]))
    if meta.get("format") != "fmim-checkpoint":
        raise CheckpointError(f"{path} is not an fmim checkpoint")
    if meta.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {meta.get('version')}")
    cfg = TaggerConfig(**meta["tagger_config"])
    params = ModelParams(cfg, {k[6:]: v for k, v in data.items() if k.startswith("param/")})
    state = None
    if meta["optim_step"] is not None:
        state = OptimState(
            m={k[7:]: v for k, v in data.items() if k.startswith("adam_m/")},
            v={k[7:]: v for k, v in data.items() if k.startswith("adam_v/")},
            t=meta["optim_step"],
        )
    return Checkpoint(params, Vocab(meta["vocab"]), TagScheme.from_dict(meta["scheme"]), state, meta["run_config"])
