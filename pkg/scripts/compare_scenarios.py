#!/usr/bin/env python3
"""Train a surrogate on both scenarios and print the R-squared contrast.

On the heterogeneous platform the surrogate learns compute time well but the
contention-dominated transfer times poorly; on the homogeneous platform
(identical jobs, no usable features) compute R-squared collapses.  This script
reproduces that contrast for a list of seeds and prints one table per seed,
plus the simulator/surrogate speedup at a large job count.

Usage:
    python scripts/compare_scenarios.py --seeds 0,1,2 --epochs 30
"""

import time

import click
import numpy as np

from simsurrogate.engine import run_simulation
from simsurrogate.evaluate import evaluate_model, predict_rows
from simsurrogate.nn.models import ModelConfig
from simsurrogate.platform import builtin_platform
from simsurrogate.preprocess import fit_standardizer, make_windows, split_train_eval
from simsurrogate.traceio import SampleTable, join_traces, feature_names
from simsurrogate.train import TrainConfig, train_model
from simsurrogate.workload import TRAIN_JOB_COUNTS, generate_workload


def workload_rows(jobs, datasets):
    sizes = datasets.sizes()
    return [{
        "simulation_id": j.simulation_id, "job_index": j.job_index,
        "submission_time_s": j.submission_time_s, "flops": j.flops,
        "input_files": j.input_files,
        "input_files_size_bytes": sum(sizes[f] for f in j.input_files),
        "output_files_size_bytes": j.output_files_size_bytes,
        "class_id": j.class_id,
    } for j in jobs]


def simulate_table(scenario, platform, n_jobs, sim_id, seed):
    jobs, datasets = generate_workload(scenario, n_jobs, sim_id, seed)
    traces = run_simulation(platform, jobs, datasets)
    return join_traces(scenario, workload_rows(jobs, datasets), traces)


def concat(tables):
    first = tables[0]
    return SampleTable(
        first.scenario,
        np.concatenate([t.simulation_ids for t in tables]),
        np.concatenate([t.job_indices for t in tables]),
        np.concatenate([t.features for t in tables]),
        np.concatenate([t.targets for t in tables]),
        first.feature_names, first.target_names)


def scaled(table, f_std, t_std):
    return SampleTable(table.scenario, table.simulation_ids, table.job_indices,
                       f_std.transform(table.features), t_std.transform(table.targets),
                       table.feature_names, table.target_names)


def experiment(scenario, tables, lengths, seed, epochs, hidden, window):
    split = split_train_eval(lengths, 0.7, seed)
    train_t = concat([tables[i] for i in split.train_ids])
    eval_t = concat([tables[i] for i in split.eval_ids])
    f_std = fit_standardizer(train_t.features, names=train_t.feature_names)
    t_std = fit_standardizer(train_t.targets, names=train_t.target_names)
    config = ModelConfig("bigru", input_dim=len(feature_names(scenario)),
                         output_dim=5, hidden_size=hidden, window_size=window,
                         batch_size=32, seed=seed)
    params, _ = train_model(
        TrainConfig(model=config, learning_rate=1e-3, max_epochs=epochs,
                    patience=epochs, seed=seed),
        make_windows(scaled(train_t, f_std, t_std), window, 0),
        make_windows(scaled(eval_t, f_std, t_std), window, 0))
    report = evaluate_model(config, params, eval_t, f_std, t_std, seed=seed)
    return report, config, params, f_std, t_std


@click.command()
@click.option("--seeds", default="0,1,2")
@click.option("--epochs", default=30, type=int)
@click.option("--hidden", default=24, type=int)
@click.option("--window", default=16, type=int)
@click.option("--speedup-jobs", default=10_000, type=int)
def run(seeds, epochs, hidden, window, speedup_jobs):
    seed_list = [int(s) for s in seeds.split(",")]

    het_platform = builtin_platform("heterogeneous")
    hom_platform = builtin_platform("homogeneous")
    hom_tables, hom_lengths = {}, {}
    sid = 0
    for n in TRAIN_JOB_COUNTS:
        for _ in range(20):
            hom_tables[sid] = simulate_table("homogeneous", hom_platform, n, sid, 0)
            hom_lengths[sid] = n
            sid += 1

    speedup_model = None
    for seed in seed_list:
        het_tables = {s: simulate_table("heterogeneous", het_platform, 100, s, seed)
                      for s in range(200)}
        het, *model = experiment("heterogeneous", het_tables,
                                 {s: 100 for s in het_tables}, seed, epochs,
                                 hidden, window)
        hom, *_ = experiment("homogeneous", hom_tables, hom_lengths, seed,
                             max(1, epochs - 5), hidden, window)
        if speedup_model is None:
            speedup_model = model
        click.echo(f"\nseed {seed}")
        click.echo(f"  {'observable':32s} {'heterogeneous':>14s} {'homogeneous':>12s}")
        for name in het.r2:
            click.echo(f"  {name:32s} {het.r2[name]:14.4f} {hom.r2[name]:12.4f}")

    config, params, f_std, t_std = speedup_model
    jobs, datasets = generate_workload("heterogeneous", speedup_jobs, 0, seed_list[0])
    t0 = time.perf_counter()
    traces = run_simulation(het_platform, jobs, datasets)
    sim_s = time.perf_counter() - t0
    table = join_traces("heterogeneous", workload_rows(jobs, datasets), traces)
    _, sur_s = predict_rows(config, params, table, f_std, t_std)
    click.echo(f"\nspeedup at {speedup_jobs} jobs: simulator {sim_s:.2f}s, "
               f"surrogate {sur_s:.3f}s, ratio {sim_s / sur_s:.1f}x")


if __name__ == "__main__":
    run()
