"""CSV persistence for workloads and traces, and the workload/trace join.

All files are UTF-8 CSV with a header row, ``.`` decimal separator, times in
seconds with 9 decimal places, byte counts as integers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import TRACE_FIELDS, TraceRecord
from .errors import JoinError
from .workload import JobSpec

WORKLOAD_FIELDS = (
    "simulation_id",
    "job_index",
    "submission_time_s",
    "flops",
    "input_files",
    "input_files_size_bytes",
    "output_files_size_bytes",
    "class_id",
)

# Model feature order per scenario (simulation_id is carried for bookkeeping
# but never fed to a model; job_index is a model feature).
HOMOGENEOUS_FEATURES = ("job_index", "flops", "input_files_size_bytes",
                        "output_files_size_bytes")
HETEROGENEOUS_FEATURES = HOMOGENEOUS_FEATURES + ("submission_time_s",)
TARGET_OBSERVABLES = (
    "compute_time_s",
    "input_files_transfer_time_s",
    "output_files_transfer_time_s",
    "start_time_s",
    "end_time_s",
)


def feature_names(scenario: str) -> tuple[str, ...]:
    return HETEROGENEOUS_FEATURES if scenario == "heterogeneous" else HOMOGENEOUS_FEATURES


def _fmt_time(x: float) -> str:
    return f"{x:.9f}"


def write_workload_csv(path: str | Path, jobs: list[JobSpec],
                       input_sizes: dict[str, float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(WORKLOAD_FIELDS)
        for j in jobs:
            size = sum(input_sizes[f] for f in j.input_files)
            w.writerow([
                j.simulation_id,
                j.job_index,
                _fmt_time(j.submission_time_s),
                repr(j.flops),
                ";".join(j.input_files),
                int(round(size)),
                int(round(j.output_files_size_bytes)),
                j.class_id,
            ])


def read_workload_csv(path: str | Path) -> list[dict]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append({
                "simulation_id": int(rec["simulation_id"]),
                "job_index": int(rec["job_index"]),
                "submission_time_s": float(rec["submission_time_s"]),
                "flops": float(rec["flops"]),
                "input_files": tuple(f for f in rec["input_files"].split(";") if f),
                "input_files_size_bytes": float(rec["input_files_size_bytes"]),
                "output_files_size_bytes": float(rec["output_files_size_bytes"]),
                "class_id": int(rec["class_id"]),
            })
    return rows


def write_trace_csv(path: str | Path, traces: list[TraceRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_FIELDS)
        for t in traces:
            w.writerow([
                t.simulation_id,
                t.job_index,
                _fmt_time(t.submission_time_s),
                _fmt_time(t.start_time_s),
                _fmt_time(t.end_time_s),
                _fmt_time(t.compute_time_s),
                _fmt_time(t.input_files_transfer_time_s),
                _fmt_time(t.output_files_transfer_time_s),
                int(round(t.input_bytes)),
                int(round(t.output_bytes)),
                t.worker_id,
            ])


def read_trace_csv(path: str | Path) -> list[TraceRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            out.append(TraceRecord(
                simulation_id=int(rec["simulation_id"]),
                job_index=int(rec["job_index"]),
                submission_time_s=float(rec["submission_time_s"]),
                start_time_s=float(rec["start_time_s"]),
                end_time_s=float(rec["end_time_s"]),
                compute_time_s=float(rec["compute_time_s"]),
                input_files_transfer_time_s=float(rec["input_files_transfer_time_s"]),
                output_files_transfer_time_s=float(rec["output_files_transfer_time_s"]),
                input_bytes=float(rec["input_bytes"]),
                output_bytes=float(rec["output_bytes"]),
                worker_id=rec["worker_id"],
            ))
    return out


@dataclass
class SampleTable:
    """Model-ready rows, ordered by (simulation_id, job_index)."""

    scenario: str
    simulation_ids: np.ndarray  # [n] int64
    job_indices: np.ndarray  # [n] int64
    features: np.ndarray  # [n, F] float64
    targets: np.ndarray  # [n, K] float64
    feature_names: tuple[str, ...]
    target_names: tuple[str, ...] = TARGET_OBSERVABLES

    def __len__(self) -> int:
        return len(self.simulation_ids)

    def simulation_groups(self) -> dict[int, np.ndarray]:
        """Row indices per simulation, rows already sorted by job_index."""
        order = np.argsort(self.simulation_ids, kind="stable")
        uniq, starts = np.unique(self.simulation_ids[order], return_index=True)
        bounds = np.append(starts, len(order))
        return {int(sid): order[a:b]
                for sid, a, b in zip(uniq, bounds[:-1], bounds[1:])}

    def subset(self, row_mask: np.ndarray) -> "SampleTable":
        return SampleTable(
            scenario=self.scenario,
            simulation_ids=self.simulation_ids[row_mask],
            job_indices=self.job_indices[row_mask],
            features=self.features[row_mask],
            targets=self.targets[row_mask],
            feature_names=self.feature_names,
            target_names=self.target_names,
        )


def join_traces(scenario: str, workload_rows: list[dict],
                traces: list[TraceRecord]) -> SampleTable:
    """Join workload features with trace observables; lossless, key-checked."""
    wl = {(r["simulation_id"], r["job_index"]): r for r in workload_rows}
    tr = {(t.simulation_id, t.job_index): t for t in traces}
    unmatched = sorted(set(wl) ^ set(tr))
    if unmatched:
        shown = ", ".join(str(k) for k in unmatched[:10])
        raise JoinError(
            f"{len(unmatched)} unmatched (simulation_id, job_index) keys; first: {shown}"
        )
    keys = sorted(wl)
    feats = feature_names(scenario)
    features = np.empty((len(keys), len(feats)))
    targets = np.empty((len(keys), len(TARGET_OBSERVABLES)))
    for i, key in enumerate(keys):
        row, trace = wl[key], tr[key]
        for j, name in enumerate(feats):
            features[i, j] = row[name]
        for j, name in enumerate(TARGET_OBSERVABLES):
            targets[i, j] = getattr(trace, name)
    return SampleTable(
        scenario=scenario,
        simulation_ids=np.asarray([k[0] for k in keys], dtype=np.int64),
        job_indices=np.asarray([k[1] for k in keys], dtype=np.int64),
        features=features,
        targets=targets,
        feature_names=feats,
    )


def write_samples_csv(path: str | Path, table: SampleTable) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("scenario", "simulation_id", "job_index")
                   + table.feature_names + table.target_names)
        for i in range(len(table)):
            w.writerow(
                [table.scenario, int(table.simulation_ids[i]), int(table.job_indices[i])]
                + [repr(float(v)) for v in table.features[i]]
                + [repr(float(v)) for v in table.targets[i]]
            )


def read_samples_csv(path: str | Path) -> SampleTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    if not rows:
        raise JoinError(f"no sample rows in {path}")
    scenario = rows[0][0]
    feats = feature_names(scenario)
    n_feat = len(feats)
    assert tuple(header[3:3 + n_feat]) == feats, "sample file feature order mismatch"
    sim_ids = np.asarray([int(r[1]) for r in rows], dtype=np.int64)
    job_ix = np.asarray([int(r[2]) for r in rows], dtype=np.int64)
    features = np.asarray([[float(v) for v in r[3:3 + n_feat]] for r in rows])
    targets = np.asarray([[float(v) for v in r[3 + n_feat:]] for r in rows])
    return SampleTable(scenario, sim_ids, job_ix, features, targets, feats)
