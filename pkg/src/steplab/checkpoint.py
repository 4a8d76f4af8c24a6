"""Single-file model checkpoints: one .npz holding every parameter array in
the documented flat order plus a JSON metadata record. A loaded checkpoint
reproduces forward outputs bit for bit."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .model import (AttentionParams, HeadParams, LayerParams, ModelConfig,
                    ModelParams, init_params)
from .train import TrainConfig

CHECKPOINT_FORMAT = "steplab-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    params: ModelParams
    model_config: ModelConfig
    train_config: TrainConfig
    input_mode: str
    downsample_factor: int
    epoch: int


def _params_from_arrays(config: ModelConfig, arrays: list[np.ndarray]) -> ModelParams:
    it = iter(arrays)
    try:
        layers = [LayerParams(w_x=next(it), w_h=next(it), b=next(it))
                  for _ in range(config.num_layers)]
        attention = None
        if config.use_attention:
            w = next(it)
            b = next(it) if config.attention_bias else None
            attention = AttentionParams(w=w, b=b)
        if config.head_layers == 2:
            head = HeadParams(w1=next(it), b1=next(it), w2=next(it), b2=next(it))
        else:
            head = HeadParams(w1=next(it), b1=next(it), w2=None, b2=None)
    except StopIteration:
        raise ValueError("checkpoint holds fewer arrays than the model "
                         "configuration requires") from None
    leftover = sum(1 for _ in it)
    if leftover:
        raise ValueError(f"checkpoint holds {leftover} extra arrays")
    params = ModelParams(layers=layers, attention=attention, head=head)
    template = init_params(config, seed=0)
    for i, (got, want) in enumerate(zip(params.flat(), template.flat())):
        if got.shape != want.shape:
            raise ValueError(f"array {i} has shape {got.shape}, expected {want.shape}")
    return params


def save_checkpoint(path, params: ModelParams, model_config: ModelConfig,
                    train_config: TrainConfig, input_mode: str,
                    downsample_factor: int = 1, epoch: int = 0) -> Path:
    """Write the checkpoint; returns the path actually written (np.savez
    appends .npz when missing)."""
    arrays = params.flat()
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_config": asdict(model_config),
        "train_config": asdict(train_config),
        "input_mode": input_mode,
        "downsample_factor": int(downsample_factor),
        "epoch": int(epoch),
        "num_arrays": len(arrays),
    }
    payload = {f"p{i:04d}": np.ascontiguousarray(a, dtype=np.float64)
               for i, a in enumerate(arrays)}
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_name(path.name + ".npz")
    np.savez(path, meta=np.array(json.dumps(meta, sort_keys=True)), **payload)
    return path


def load_checkpoint(path) -> Checkpoint:
    with np.load(Path(path), allow_pickle=False) as archive:
        if "meta" not in archive:
            raise ValueError(f"{path} is not a model checkpoint (no metadata)")
        meta = json.loads(str(archive["meta"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unrecognized checkpoint format {meta.get('format')!r}")
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
        arrays = [archive[f"p{i:04d}"] for i in range(meta["num_arrays"])]
    model_config = ModelConfig(**meta["model_config"])
    train_config = TrainConfig(**meta["train_config"])
    params = _params_from_arrays(model_config, arrays)
    return Checkpoint(params=params, model_config=model_config,
                      train_config=train_config, input_mode=meta["input_mode"],
                      downsample_factor=meta["downsample_factor"],
                      epoch=meta["epoch"])
