"""Two-stage hyperparameter search: 10 random trials, then coordinate-wise
refinement of the top 3 in a fixed parameter order.

Model selection is automated on eval-set MSE.  Every trial is appended to an
audit log so a run can be replayed and verified.
"""

from __future__ import annotations

import copy
import csv
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ModelConfigError, TrainingError
from .nn.models import ModelConfig

COORDINATE_ORDER = ("hidden_size", "window_size", "window_overlap",
                    "num_layers", "batch_size")


@dataclass
class SearchSpace:
    hidden_size: tuple[int, ...] = (16, 32, 64)
    window_size: tuple[int, ...] = (8, 16, 32)
    window_overlap: tuple[int, ...] = (0, 2, 4)
    num_layers: tuple[int, ...] = (1, 2)
    batch_size: tuple[int, ...] = (16, 32, 64)
    num_heads: tuple[int, ...] = (1, 2, 4)

    def __post_init__(self):
        for name in COORDINATE_ORDER + ("num_heads",):
            if not getattr(self, name):
                raise TrainingError(f"search space for {name} is empty")
        if min(self.window_overlap) >= max(self.window_size):
            raise TrainingError("no window_overlap candidate below the largest window_size")

    def candidates(self, name: str) -> tuple[int, ...]:
        return tuple(getattr(self, name))


@dataclass
class TrialRecord:
    trial_id: int
    stage: str  # "random" or "sweep:<param>"
    survivor: int  # -1 during stage 1
    config: ModelConfig
    eval_loss: float
    status: str  # "ok" / "skipped:<reason>"
    wall_clock_s: float


def _valid(config: ModelConfig) -> bool:
    if config.window_overlap >= config.window_size:
        return False
    if config.architecture == "transformer" and config.hidden_size % config.num_heads:
        return False
    return True


def _try_replace(base: ModelConfig, **changes) -> ModelConfig | None:
    """Build a variant config; None if the combination fails validation."""
    try:
        return replace(base, **changes)
    except ModelConfigError:
        return None


def _sample_config(rng: np.random.Generator, space: SearchSpace,
                   base: ModelConfig) -> ModelConfig:
    while True:
        cfg = _try_replace(
            base,
            hidden_size=int(rng.choice(space.hidden_size)),
            window_size=int(rng.choice(space.window_size)),
            window_overlap=int(rng.choice(space.window_overlap)),
            num_layers=int(rng.choice(space.num_layers)),
            batch_size=int(rng.choice(space.batch_size)),
            num_heads=int(rng.choice(space.num_heads)),
        )
        if cfg is not None:
            return cfg


def tune_hyperparameters(
    space: SearchSpace,
    base: ModelConfig,
    train_fn: Callable[[ModelConfig], float],
    seed: int = 0,
    n_random: int = 10,
    n_survivors: int = 3,
) -> tuple[ModelConfig, float, list[TrialRecord]]:
    """Run the search; returns (best config, its eval loss, audit log).

    `train_fn` trains one candidate and returns its eval loss; failures are
    logged and the trial skipped.
    """
    rng = np.random.default_rng(seed)
    audit: list[TrialRecord] = []
    trial_id = 0

    def run_trial(stage: str, survivor: int, config: ModelConfig) -> float | None:
        nonlocal trial_id
        t0 = time.perf_counter()
        try:
            loss = float(train_fn(config))
            status = "ok"
        except TrainingError as exc:
            loss = float("nan")
            status = f"skipped:{exc}"
        audit.append(TrialRecord(trial_id, stage, survivor, config, loss, status,
                                 time.perf_counter() - t0))
        trial_id += 1
        return loss if status == "ok" else None

    # Stage 1: random sampling.
    stage1: list[tuple[float, int, ModelConfig]] = []
    for i in range(n_random):
        cfg = _sample_config(rng, space, base)
        loss = run_trial("random", -1, cfg)
        if loss is not None:
            stage1.append((loss, i, cfg))
    if not stage1:
        raise TrainingError("all random trials failed")
    stage1.sort(key=lambda t: (t[0], t[1]))
    survivors = stage1[:n_survivors]

    # Stage 2: coordinate-wise refinement in fixed order.
    order = COORDINATE_ORDER + (("num_heads",) if base.architecture == "transformer" else ())
    refined: list[tuple[float, int, ModelConfig]] = []
    for rank, (loss, _, cfg) in enumerate(survivors):
        best_loss, best_cfg = loss, cfg
        for param in order:
            for cand in space.candidates(param):
                if cand == getattr(best_cfg, param):
                    continue  # already evaluated at this value
                # bypass constructor validation so invalid combinations can
                # still be recorded verbatim in the audit log
                candidate = copy.copy(best_cfg)
                setattr(candidate, param, int(cand))
                if not _valid(candidate):
                    audit.append(TrialRecord(trial_id, f"sweep:{param}", rank, candidate,
                                             float("nan"), "skipped:invalid combination", 0.0))
                    trial_id += 1
                    continue
                cand_loss = run_trial(f"sweep:{param}", rank, candidate)
                if cand_loss is not None and cand_loss < best_loss:
                    best_loss, best_cfg = cand_loss, candidate
        refined.append((best_loss, rank, best_cfg))

    refined.sort(key=lambda t: (t[0], t[1]))
    best_loss, _, best_cfg = refined[0]
    return best_cfg, best_loss, audit


AUDIT_FIELDS = ("trial_id", "stage", "survivor", "architecture", "hidden_size",
                "window_size", "window_overlap", "num_layers", "batch_size",
                "num_heads", "eval_loss", "status", "wall_clock_s")


def write_audit_csv(path: str | Path, audit: list[TrialRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(AUDIT_FIELDS)
        for rec in audit:
            c = rec.config
            w.writerow([rec.trial_id, rec.stage, rec.survivor, c.architecture,
                        c.hidden_size, c.window_size, c.window_overlap, c.num_layers,
                        c.batch_size, c.num_heads, repr(rec.eval_loss), rec.status,
                        f"{rec.wall_clock_s:.6f}"])
