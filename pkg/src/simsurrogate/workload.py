"""Seeded workload generation for both evaluation scenarios.

Sampling uses numpy's Philox counter-based generator keyed by
``(seed, scenario, simulation_id)`` so every simulation's workload is an
independent, portable, bit-reproducible stream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .errors import WorkloadError
from .platform import HOMOGENEOUS_STORAGE, HETEROGENEOUS_STORAGE, SCENARIOS


@dataclass(frozen=True)
class JobSpec:
    simulation_id: int
    job_index: int
    submission_time_s: float
    flops: float
    input_files: tuple[str, ...]
    output_files_size_bytes: float
    class_id: int


@dataclass(frozen=True)
class FileSpec:
    file_id: str
    size_bytes: float
    location: str


@dataclass(frozen=True)
class DatasetSpec:
    files: tuple[FileSpec, ...]

    def sizes(self) -> dict[str, float]:
        return {f.file_id: f.size_bytes for f in self.files}


@dataclass(frozen=True)
class JobClassSpec:
    """Lognormal resource demands plus exponential interarrival gaps."""

    class_id: int
    flops_median: float
    flops_sigma: float
    input_size_median_bytes: float
    input_size_sigma: float
    output_size_median_bytes: float
    output_size_sigma: float
    mean_interarrival_s: float


# Pinned parameters of the five heterogeneous job classes.  Flops medians span
# two decades so compute times are strongly multimodal; input sizes and
# interarrival gaps put the shared storage uplink near critical load, which
# makes transfer times contention-dominated.
DEFAULT_JOB_CLASSES: tuple[JobClassSpec, ...] = (
    JobClassSpec(0, 1.0e10, 0.25, 2.0e8, 0.4, 2.0e7, 0.4, 8.0),
    JobClassSpec(1, 3.2e10, 0.25, 4.0e8, 0.4, 4.0e7, 0.4, 9.0),
    JobClassSpec(2, 1.0e11, 0.25, 7.0e8, 0.4, 7.0e7, 0.4, 10.0),
    JobClassSpec(3, 3.2e11, 0.25, 1.2e9, 0.4, 1.2e8, 0.4, 11.0),
    JobClassSpec(4, 1.0e12, 0.25, 2.0e9, 0.4, 2.0e8, 0.4, 12.0),
)

# Fixed demands of the homogeneous scenario.
HOMOGENEOUS_FLOPS = 1e11
HOMOGENEOUS_INPUT_BYTES = 1e9
HOMOGENEOUS_OUTPUT_BYTES = 1e8

_TINY = 1e-9


def load_job_classes(path: str) -> tuple[JobClassSpec, ...]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return tuple(JobClassSpec(**entry) for entry in doc["classes"])


def dump_job_classes(classes: tuple[JobClassSpec, ...]) -> str:
    return json.dumps({"classes": [asdict(c) for c in classes]}, indent=2)


def _rng(scenario: str, simulation_id: int, seed: int) -> np.random.Generator:
    scenario_code = SCENARIOS.index(scenario)
    key = np.array(
        [np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
         np.uint64((simulation_id << 1) | scenario_code)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


def _lognormal(rng: np.random.Generator, median: float, sigma: float) -> float:
    return max(float(rng.lognormal(mean=np.log(median), sigma=sigma)), _TINY)


def generate_workload(
    scenario: str,
    n_jobs: int,
    simulation_id: int,
    seed: int,
    classes: tuple[JobClassSpec, ...] = DEFAULT_JOB_CLASSES,
) -> tuple[list[JobSpec], DatasetSpec]:
    """Generate one simulation's jobs and initial file placement."""
    if scenario not in SCENARIOS:
        raise WorkloadError(f"unknown scenario {scenario!r}")
    if n_jobs < 0:
        raise WorkloadError(f"n_jobs must be nonnegative, got {n_jobs}")

    jobs: list[JobSpec] = []
    files: list[FileSpec] = []
    if scenario == "homogeneous":
        storage = HOMOGENEOUS_STORAGE
        for i in range(n_jobs):
            file_id = f"sim{simulation_id}_job{i}_in"
            files.append(FileSpec(file_id, HOMOGENEOUS_INPUT_BYTES, storage))
            jobs.append(
                JobSpec(
                    simulation_id=simulation_id,
                    job_index=i,
                    submission_time_s=0.0,
                    flops=HOMOGENEOUS_FLOPS,
                    input_files=(file_id,),
                    output_files_size_bytes=HOMOGENEOUS_OUTPUT_BYTES,
                    class_id=0,
                )
            )
    else:
        storage = HETEROGENEOUS_STORAGE
        rng = _rng(scenario, simulation_id, seed)
        t = 0.0
        for i in range(n_jobs):
            cls = classes[int(rng.integers(len(classes)))]
            gap = max(float(rng.exponential(cls.mean_interarrival_s)), _TINY)
            t += gap
            flops = _lognormal(rng, cls.flops_median, cls.flops_sigma)
            in_size = _lognormal(rng, cls.input_size_median_bytes, cls.input_size_sigma)
            out_size = _lognormal(rng, cls.output_size_median_bytes, cls.output_size_sigma)
            file_id = f"sim{simulation_id}_job{i}_in"
            files.append(FileSpec(file_id, in_size, storage))
            jobs.append(
                JobSpec(
                    simulation_id=simulation_id,
                    job_index=i,
                    submission_time_s=t,
                    flops=flops,
                    input_files=(file_id,),
                    output_files_size_bytes=out_size,
                    class_id=cls.class_id,
                )
            )
    return jobs, DatasetSpec(files=tuple(files))


@dataclass(frozen=True)
class SuiteEntry:
    n_jobs: int
    n_simulations: int
    kind: str  # "train" or "extrapolation"


TRAIN_JOB_COUNTS = (1, 10, 20, 50, 100, 250, 500, 1000, 1500, 2000)
EXTRAPOLATION_JOB_COUNT = 10_000
EXTRAPOLATION_SIMULATIONS = 10


def scenario_suite(scenario: str, sims_per_batch: int = 1000) -> list[SuiteEntry]:
    """Training suite (10 job-count batches) plus the extrapolation suite."""
    if scenario not in SCENARIOS:
        raise WorkloadError(f"unknown scenario {scenario!r}")
    if sims_per_batch < 1:
        raise WorkloadError("sims_per_batch must be >= 1")
    suite = [SuiteEntry(n, sims_per_batch, "train") for n in TRAIN_JOB_COUNTS]
    suite.append(SuiteEntry(EXTRAPOLATION_JOB_COUNT, EXTRAPOLATION_SIMULATIONS, "extrapolation"))
    return suite
