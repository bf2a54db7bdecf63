"""Model checkpoints: config, parameter arrays, and fitted standardizers in a
single .npz container with a versioned header."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import TrainingError
from .nn.models import ModelConfig
from .preprocess import Standardizer

CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    feature_std: Standardizer
    target_std: Standardizer
    scenario: str
    seed: int


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    header = {
        "version": CHECKPOINT_VERSION,
        "scenario": ckpt.scenario,
        "seed": ckpt.seed,
        "config": ckpt.config.to_dict(),
        "feature_std": json.loads(ckpt.feature_std.to_json()),
        "target_std": json.loads(ckpt.target_std.to_json()),
        "param_names": sorted(ckpt.params),
    }
    arrays = {f"param/{k}": v for k, v in ckpt.params.items()}
    arrays["__header__"] = np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path: str | Path) -> Checkpoint:
    with np.load(path) as data:
        header = json.loads(bytes(data["__header__"]).decode("utf-8"))
        if header.get("version") != CHECKPOINT_VERSION:
            raise TrainingError(f"unsupported checkpoint version {header.get('version')}")
        params = {k[len("param/"):]: data[k] for k in data.files if k.startswith("param/")}
    return Checkpoint(
        config=ModelConfig.from_dict(header["config"]),
        params=params,
        feature_std=Standardizer.from_json(json.dumps(header["feature_std"])),
        target_std=Standardizer.from_json(json.dumps(header["target_std"])),
        scenario=header["scenario"],
        seed=header["seed"],
    )
