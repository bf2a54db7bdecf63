import numpy as np
import pytest

from simsurrogate.engine import run_simulation
from simsurrogate.errors import JoinError
from simsurrogate.platform import builtin_platform
from simsurrogate.traceio import (
    HETEROGENEOUS_FEATURES,
    HOMOGENEOUS_FEATURES,
    join_traces,
    read_samples_csv,
    read_trace_csv,
    read_workload_csv,
    write_samples_csv,
    write_trace_csv,
    write_workload_csv,
)
from simsurrogate.workload import generate_workload


@pytest.fixture(scope="module")
def sim_data():
    platform = builtin_platform("heterogeneous")
    jobs, ds = generate_workload("heterogeneous", 10, 0, 21)
    traces = run_simulation(platform, jobs, ds)
    return jobs, ds, traces


def test_workload_csv_round_trip(tmp_path, sim_data):
    jobs, ds, _ = sim_data
    path = tmp_path / "workload.csv"
    write_workload_csv(path, jobs, ds.sizes())
    rows = read_workload_csv(path)
    assert len(rows) == len(jobs)
    for row, j in zip(rows, jobs):
        assert row["job_index"] == j.job_index
        assert row["flops"] == j.flops  # repr round-trip is lossless
        assert row["input_files"] == j.input_files


def test_trace_csv_round_trip(tmp_path, sim_data):
    _, _, traces = sim_data
    path = tmp_path / "trace.csv"
    write_trace_csv(path, traces)
    back = read_trace_csv(path)
    for a, b in zip(back, traces):
        # times are persisted at 9 decimal places
        assert abs(a.compute_time_s - b.compute_time_s) < 1e-9
        assert abs(a.end_time_s - b.end_time_s) < 1e-9
        assert a.worker_id == b.worker_id
        assert a.input_bytes == round(b.input_bytes)


def test_join_produces_ordered_rows(tmp_path, sim_data):
    jobs, ds, traces = sim_data
    write_workload_csv(tmp_path / "w.csv", jobs, ds.sizes())
    table = join_traces("heterogeneous", read_workload_csv(tmp_path / "w.csv"), traces)
    assert len(table) == 10
    assert list(table.job_indices) == list(range(10))
    assert table.feature_names == HETEROGENEOUS_FEATURES
    # submission_time is a feature only in the heterogeneous scenario
    assert "submission_time_s" not in HOMOGENEOUS_FEATURES


def test_join_disjoint_keys_error(sim_data):
    jobs, ds, traces = sim_data
    rows = [{
        "simulation_id": 99, "job_index": i, "submission_time_s": 0.0,
        "flops": 1.0, "input_files": (), "input_files_size_bytes": 1.0,
        "output_files_size_bytes": 1.0, "class_id": 0,
    } for i in range(3)]
    with pytest.raises(JoinError, match="unmatched"):
        join_traces("heterogeneous", rows, traces)


def test_samples_csv_round_trip(tmp_path, sim_data):
    jobs, ds, traces = sim_data
    write_workload_csv(tmp_path / "w.csv", jobs, ds.sizes())
    table = join_traces("heterogeneous", read_workload_csv(tmp_path / "w.csv"), traces)
    write_samples_csv(tmp_path / "samples.csv", table)
    back = read_samples_csv(tmp_path / "samples.csv")
    np.testing.assert_array_equal(back.features, table.features)
    np.testing.assert_array_equal(back.targets, table.targets)
    assert back.scenario == table.scenario
