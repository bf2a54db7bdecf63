"""Standardization, fixed-size overlapping windows, and the train/eval split."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreprocessError
from .traceio import SampleTable

PAD = -1  # provenance marker for padded positions


@dataclass
class Standardizer:
    """Per-feature z-scoring fitted on training rows (population std).

    The fitted std is stored as-is; transform substitutes 1 where it is 0 so
    constant features map to 0 instead of dividing by zero.
    """

    mean: np.ndarray
    std: np.ndarray
    names: tuple[str, ...] = ()

    def _safe_std(self) -> np.ndarray:
        return np.where(self.std == 0.0, 1.0, self.std)

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.mean.shape[0]:
            raise PreprocessError(
                f"feature arity mismatch: got {x.shape[-1]}, fitted {self.mean.shape[0]}"
            )
        return (x - self.mean) / self._safe_std()

    def inverse_transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.mean.shape[0]:
            raise PreprocessError(
                f"feature arity mismatch: got {x.shape[-1]}, fitted {self.mean.shape[0]}"
            )
        return x * self._safe_std() + self.mean

    def to_json(self) -> str:
        return json.dumps({
            "names": list(self.names),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "Standardizer":
        doc = json.loads(text)
        return cls(np.asarray(doc["mean"], dtype=float),
                   np.asarray(doc["std"], dtype=float),
                   tuple(doc["names"]))


def fit_standardizer(rows: np.ndarray, names: tuple[str, ...] = ()) -> Standardizer:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise PreprocessError("need at least one row to fit a standardizer")
    return Standardizer(rows.mean(axis=0), rows.std(axis=0), names)


@dataclass
class WindowBatch:
    """Fixed-size zero-padded windows with masks and row provenance."""

    windows: np.ndarray  # [n_windows, W, F]
    targets: np.ndarray  # [n_windows, W, K]
    mask: np.ndarray  # [n_windows, W] bool, True = real row
    provenance: np.ndarray  # [n_windows, W, 2] (simulation_id, job_index), PAD if padding

    @property
    def window_size(self) -> int:
        return self.windows.shape[1]

    def __len__(self) -> int:
        return self.windows.shape[0]

    def select(self, ix) -> "WindowBatch":
        return WindowBatch(self.windows[ix], self.targets[ix],
                           self.mask[ix], self.provenance[ix])


def _window_starts(n: int, window: int, overlap: int) -> list[int]:
    stride = window - overlap
    starts = [0]
    while starts[-1] + window < n:
        starts.append(starts[-1] + stride)
    return starts


def make_windows(table: SampleTable, window_size: int, overlap: int) -> WindowBatch:
    """Per-simulation windows at stride window_size - overlap, zero padded."""
    if not 0 <= overlap < window_size:
        raise PreprocessError(
            f"overlap must satisfy 0 <= overlap < window_size, got {overlap} >= {window_size}"
        )
    wins, tgts, masks, prov = [], [], [], []
    n_feat = table.features.shape[1]
    n_tgt = table.targets.shape[1]
    groups = table.simulation_groups()
    offsets = np.arange(window_size)
    for sid in sorted(groups):
        ix = groups[sid]
        n = len(ix)
        starts = np.asarray(_window_starts(n, window_size, overlap))
        pos = starts[:, None] + offsets  # [n_windows, W] row offsets into ix
        valid = pos < n
        rows = ix[np.minimum(pos, n - 1)]
        wins.append(table.features[rows] * valid[:, :, None])
        tgts.append(table.targets[rows] * valid[:, :, None])
        masks.append(valid)
        p = np.stack([table.simulation_ids[rows], table.job_indices[rows]], axis=-1)
        prov.append(np.where(valid[:, :, None], p, PAD))
    if not wins:
        return WindowBatch(np.zeros((0, window_size, n_feat)),
                           np.zeros((0, window_size, n_tgt)),
                           np.zeros((0, window_size), dtype=bool),
                           np.full((0, window_size, 2), PAD, dtype=np.int64))
    return WindowBatch(np.concatenate(wins), np.concatenate(tgts),
                       np.concatenate(masks), np.concatenate(prov))


def unwindow(values: np.ndarray, provenance: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
    """Map windowed values back to per-(simulation_id, job_index) rows.

    Where overlapping windows predict the same row more than once, the value
    from the earliest window wins.  Padded positions are discarded.
    """
    keys, flat_ix = _first_assignments(provenance)
    flat_values = values.reshape(-1, values.shape[-1])[flat_ix]
    return {
        (int(k >> 32), int(k & 0xFFFFFFFF)): flat_values[i]
        for i, k in enumerate(keys)
    }


def _first_assignments(provenance: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Packed (sid << 32 | job_index) keys and the flat index of each key's
    earliest (window-major) occurrence."""
    prov = provenance.reshape(-1, 2)
    valid = np.nonzero(prov[:, 1] != PAD)[0]
    packed = (prov[valid, 0] << np.int64(32)) | prov[valid, 1]
    keys, first = np.unique(packed, return_index=True)
    return keys, valid[first]


def unwindow_aligned(values: np.ndarray, provenance: np.ndarray,
                     simulation_ids: np.ndarray, job_indices: np.ndarray) -> np.ndarray:
    """Per-row values aligned with (simulation_ids, job_indices); earliest
    window wins, as in unwindow."""
    keys, flat_ix = _first_assignments(provenance)
    wanted = (simulation_ids.astype(np.int64) << np.int64(32)) | job_indices
    pos = np.searchsorted(keys, wanted)
    if pos.size and (pos.max(initial=0) >= len(keys) or (keys[np.minimum(pos, len(keys) - 1)] != wanted).any()):
        raise PreprocessError("windows do not cover every requested row")
    return values.reshape(-1, values.shape[-1])[flat_ix[pos]]


@dataclass
class SplitSpec:
    """Whole-simulation train/eval assignment, grouped by simulation length."""

    fraction: float
    seed: int
    train_ids: tuple[int, ...]
    eval_ids: tuple[int, ...]
    groups: dict[int, dict[str, tuple[int, ...]]] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "fraction": self.fraction,
            "seed": self.seed,
            "train_ids": list(self.train_ids),
            "eval_ids": list(self.eval_ids),
            "groups": {str(k): {s: list(v) for s, v in g.items()}
                       for k, g in self.groups.items()},
        })

    @classmethod
    def from_json(cls, text: str) -> "SplitSpec":
        doc = json.loads(text)
        return cls(
            fraction=doc["fraction"],
            seed=doc["seed"],
            train_ids=tuple(doc["train_ids"]),
            eval_ids=tuple(doc["eval_ids"]),
            groups={int(k): {s: tuple(v) for s, v in g.items()}
                    for k, g in doc["groups"].items()},
        )


def split_train_eval(sim_lengths: dict[int, int], fraction: float = 0.7,
                     seed: int = 0) -> SplitSpec:
    """Assign whole simulations to train/eval per length group.

    Train count per group is round-half-up of fraction * group size, so a
    singleton group goes to train.
    """
    if not 0 < fraction < 1:
        raise PreprocessError(f"fraction must be in (0, 1), got {fraction}")
    if not sim_lengths:
        raise PreprocessError("no simulations to split")
    by_length: dict[int, list[int]] = {}
    for sid, length in sim_lengths.items():
        by_length.setdefault(int(length), []).append(int(sid))
    rng = np.random.default_rng(seed)
    train: list[int] = []
    evaluation: list[int] = []
    groups: dict[int, dict[str, tuple[int, ...]]] = {}
    for length in sorted(by_length):
        ids = sorted(by_length[length])
        perm = rng.permutation(len(ids))
        shuffled = [ids[i] for i in perm]
        n_train = math.floor(fraction * len(ids) + 0.5)
        g_train = sorted(shuffled[:n_train])
        g_eval = sorted(shuffled[n_train:])
        train.extend(g_train)
        evaluation.extend(g_eval)
        groups[length] = {"train": tuple(g_train), "eval": tuple(g_eval)}
    return SplitSpec(fraction, seed, tuple(sorted(train)), tuple(sorted(evaluation)), groups)
