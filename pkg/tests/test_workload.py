import numpy as np
import pytest

from simsurrogate.errors import WorkloadError
from simsurrogate.workload import (
    DEFAULT_JOB_CLASSES,
    EXTRAPOLATION_JOB_COUNT,
    TRAIN_JOB_COUNTS,
    dump_job_classes,
    generate_workload,
    load_job_classes,
    scenario_suite,
)


def test_homogeneous_demands_identical():
    jobs, ds = generate_workload("homogeneous", 10, 0, 42)
    assert len(jobs) == 10
    assert len({j.flops for j in jobs}) == 1
    assert len({j.output_files_size_bytes for j in jobs}) == 1
    sizes = ds.sizes()
    assert len({sizes[j.input_files[0]] for j in jobs}) == 1
    assert all(j.submission_time_s == 0.0 for j in jobs)
    assert all(j.class_id == 0 for j in jobs)


def test_empty_workload():
    jobs, ds = generate_workload("heterogeneous", 0, 0, 1)
    assert jobs == []
    assert ds.files == ()


def test_negative_job_count_rejected():
    with pytest.raises(WorkloadError, match="nonnegative"):
        generate_workload("homogeneous", -1, 0, 1)


def test_seeded_determinism():
    a = generate_workload("heterogeneous", 50, 3, 99)
    b = generate_workload("heterogeneous", 50, 3, 99)
    assert a == b


def test_different_seeds_differ():
    a, _ = generate_workload("heterogeneous", 50, 3, 99)
    b, _ = generate_workload("heterogeneous", 50, 3, 100)
    assert a != b


def test_different_simulations_are_independent_streams():
    a, _ = generate_workload("heterogeneous", 20, 0, 7)
    b, _ = generate_workload("heterogeneous", 20, 1, 7)
    assert [j.flops for j in a] != [j.flops for j in b]


def test_heterogeneous_submission_times_strictly_increasing():
    jobs, _ = generate_workload("heterogeneous", 200, 0, 5)
    times = [j.submission_time_s for j in jobs]
    assert all(b > a for a, b in zip(times, times[1:]))


def test_all_samples_strictly_positive():
    jobs, ds = generate_workload("heterogeneous", 500, 0, 11)
    assert all(j.flops > 0 for j in jobs)
    assert all(j.output_files_size_bytes > 0 for j in jobs)
    assert all(f.size_bytes > 0 for f in ds.files)


def test_class_ids_cover_all_classes():
    jobs, _ = generate_workload("heterogeneous", 300, 0, 1)
    assert set(j.class_id for j in jobs) == set(range(5))


def test_suite_contents():
    suite = scenario_suite("homogeneous")
    train = [e for e in suite if e.kind == "train"]
    extra = [e for e in suite if e.kind == "extrapolation"]
    assert tuple(e.n_jobs for e in train) == TRAIN_JOB_COUNTS
    assert all(e.n_simulations == 1000 for e in train)
    assert len(extra) == 1
    assert extra[0].n_jobs == EXTRAPOLATION_JOB_COUNT
    assert extra[0].n_simulations == 10
    assert all(e.n_jobs >= 1 and e.n_simulations >= 1 for e in suite)


def test_suite_sims_per_batch_override():
    suite = scenario_suite("heterogeneous", sims_per_batch=20)
    assert all(e.n_simulations == 20 for e in suite if e.kind == "train")


def test_job_classes_round_trip(tmp_path):
    path = tmp_path / "classes.json"
    path.write_text(dump_job_classes(DEFAULT_JOB_CLASSES))
    assert load_job_classes(path) == DEFAULT_JOB_CLASSES
