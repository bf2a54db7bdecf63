"""Command-line pipeline: simulate -> preprocess -> train/tune -> evaluate/bench.

Every stage reads a merged experiment manifest (defaults < manifest file <
flags) and writes a meta sidecar with the manifest hash and seed so runs are
auditable and reproducible.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .engine import bench_simulation, run_simulation
from .errors import (
    EvalError,
    JoinError,
    ModelConfigError,
    PlatformFormatError,
    PlatformValidationError,
    PreprocessError,
    SimSurrogateError,
    SimulationError,
    TrainingError,
    WorkloadError,
)
from .evaluate import evaluate_model, predict_rows, speedup_report, write_report, write_speedup_csv
from .nn.models import ModelConfig
from .platform import builtin_platform
from .preprocess import Standardizer, fit_standardizer, make_windows, split_train_eval
from .traceio import (
    TARGET_OBSERVABLES,
    SampleTable,
    feature_names,
    join_traces,
    read_samples_csv,
    read_trace_csv,
    read_workload_csv,
    write_samples_csv,
    write_trace_csv,
    write_workload_csv,
)
from .train import TrainConfig, evaluate_loss, train_model
from .tuner import SearchSpace, tune_hyperparameters, write_audit_csv
from .workload import (
    EXTRAPOLATION_JOB_COUNT,
    EXTRAPOLATION_SIMULATIONS,
    TRAIN_JOB_COUNTS,
    DEFAULT_JOB_CLASSES,
    SuiteEntry,
    generate_workload,
    load_job_classes,
)

EXIT_CODES = {
    PlatformFormatError: 3,
    PlatformValidationError: 3,
    WorkloadError: 3,
    SimulationError: 4,
    JoinError: 5,
    PreprocessError: 5,
    ModelConfigError: 6,
    TrainingError: 6,
    EvalError: 7,
}


@dataclass
class ExperimentManifest:
    """Resolved settings for one experiment; desk-scale defaults."""

    scenario: str = "heterogeneous"
    out: str = "out"
    seed: int = 0
    sims_per_batch: int = 20
    job_counts: list[int] = field(default_factory=lambda: list(TRAIN_JOB_COUNTS))
    include_extrapolation: bool = True
    extrapolation_jobs: int = EXTRAPOLATION_JOB_COUNT
    extrapolation_simulations: int = EXTRAPOLATION_SIMULATIONS
    job_classes: str = ""  # optional path overriding the builtin class table
    train_fraction: float = 0.7
    arch: str = "bigru"
    hidden_size: int = 32
    num_layers: int = 1
    window_size: int = 16
    window_overlap: int = 0
    batch_size: int = 32
    num_heads: int = 2
    learning_rate: float = 1e-3
    max_epochs: int = 200
    patience: int = 20
    tune_max_epochs: int = 30
    n_random: int = 10
    n_survivors: int = 3
    hidden_sizes: list[int] = field(default_factory=lambda: [16, 32, 64])
    window_sizes: list[int] = field(default_factory=lambda: [8, 16, 32])
    window_overlaps: list[int] = field(default_factory=lambda: [0, 2, 4])
    num_layers_options: list[int] = field(default_factory=lambda: [1, 2])
    batch_sizes: list[int] = field(default_factory=lambda: [16, 32, 64])
    num_heads_options: list[int] = field(default_factory=lambda: [1, 2, 4])
    bench_repeats: int = 1
    jobs: int = 1

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        ).hexdigest()


def resolve_manifest(manifest_path: str | None, **flags) -> ExperimentManifest:
    """Merge defaults, manifest file, and explicit flags (in rising priority)."""
    values: dict = {}
    if manifest_path:
        try:
            doc = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise click.ClickException(f"cannot read manifest: {exc}")
        except json.JSONDecodeError as exc:
            raise click.ClickException(f"manifest is not valid JSON: {exc}")
        unknown = set(doc) - set(ExperimentManifest.__dataclass_fields__)
        if unknown:
            raise click.ClickException(f"unknown manifest keys: {sorted(unknown)}")
        values.update(doc)
    values.update({k: v for k, v in flags.items() if v is not None})
    return ExperimentManifest(**values)


def _scenario_dir(man: ExperimentManifest) -> Path:
    return Path(man.out) / man.scenario


def _write_meta(directory: Path, stage: str, man: ExperimentManifest) -> None:
    meta = {"stage": stage, "manifest_sha256": man.digest(), "seed": man.seed,
            "manifest": asdict(man)}
    (directory / "meta.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")


def _suite(man: ExperimentManifest) -> list[SuiteEntry]:
    suite = [SuiteEntry(int(n), man.sims_per_batch, "train") for n in man.job_counts]
    if man.include_extrapolation:
        suite.append(SuiteEntry(man.extrapolation_jobs, man.extrapolation_simulations,
                                "extrapolation"))
    return suite


def _concat_tables(tables: list[SampleTable]) -> SampleTable:
    first = tables[0]
    return SampleTable(
        scenario=first.scenario,
        simulation_ids=np.concatenate([t.simulation_ids for t in tables]),
        job_indices=np.concatenate([t.job_indices for t in tables]),
        features=np.concatenate([t.features for t in tables]),
        targets=np.concatenate([t.targets for t in tables]),
        feature_names=first.feature_names,
        target_names=first.target_names,
    )


def _simulate_one(args) -> None:
    scenario, sim_id, n_jobs, seed, sim_dir, classes_path = args
    classes = load_job_classes(classes_path) if classes_path else DEFAULT_JOB_CLASSES
    platform = builtin_platform(scenario)
    jobs, datasets = generate_workload(scenario, n_jobs, sim_id, seed, classes)
    traces = run_simulation(platform, jobs, datasets)
    sim_dir.mkdir(parents=True, exist_ok=True)
    write_workload_csv(sim_dir / "workload.csv", jobs, datasets.sizes())
    write_trace_csv(sim_dir / "trace.csv", traces)


def _require(path: Path, prior: str) -> Path:
    if not path.exists():
        raise click.ClickException(f"missing {path}; run `simsurrogate {prior}` first")
    return path


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SimSurrogateError as exc:
            code = EXIT_CODES.get(type(exc), 1)
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(code)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(1)
    return wrapper


def common_options(fn):
    fn = click.option("--manifest", "manifest_path", type=click.Path(), default=None,
                      help="JSON manifest; flags override its values.")(fn)
    fn = click.option("--scenario", type=click.Choice(["homogeneous", "heterogeneous"]),
                      default=None)(fn)
    fn = click.option("--sims-per-batch", type=int, default=None)(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("--arch", type=click.Choice(["bigru", "bilstm", "transformer"]),
                      default=None)(fn)
    fn = click.option("--out", type=click.Path(), default=None)(fn)
    fn = click.option("--jobs", type=int, default=None, help="Worker process cap.")(fn)
    return fn


@click.group()
def main():
    """Distributed-computing simulator with sequence-model surrogates."""


@main.command()
@common_options
@click.option("--job-classes", type=click.Path(exists=True), default=None,
              help="JSON job-class table overriding the builtin one.")
@_handle_errors
def simulate(manifest_path, job_classes, **flags):
    """Generate workloads and run the simulator over the scenario suite."""
    man = resolve_manifest(manifest_path, job_classes=job_classes, **flags)
    base = _scenario_dir(man)
    base.mkdir(parents=True, exist_ok=True)
    sims = []
    tasks = []
    sim_id = 0
    for entry in _suite(man):
        for _ in range(entry.n_simulations):
            sims.append({"simulation_id": sim_id, "n_jobs": entry.n_jobs,
                         "kind": entry.kind})
            tasks.append((man.scenario, sim_id, entry.n_jobs, man.seed,
                          base / f"sim_{sim_id}", man.job_classes or None))
            sim_id += 1
    if man.jobs > 1:
        with ProcessPoolExecutor(max_workers=man.jobs) as pool:
            list(pool.map(_simulate_one, tasks))
    else:
        for task in tasks:
            _simulate_one(task)
    (base / "suite.json").write_text(
        json.dumps({"scenario": man.scenario, "seed": man.seed,
                    "manifest_sha256": man.digest(), "simulations": sims}, indent=2),
        encoding="utf-8")
    _write_meta(base, "simulate", man)
    click.echo(f"simulated {len(sims)} runs under {base}")


def _load_suite(man: ExperimentManifest) -> list[dict]:
    path = _require(_scenario_dir(man) / "suite.json", "simulate")
    return json.loads(path.read_text(encoding="utf-8"))["simulations"]


def _load_sim_table(man: ExperimentManifest, sim_id: int) -> SampleTable:
    sim_dir = _scenario_dir(man) / f"sim_{sim_id}"
    _require(sim_dir / "workload.csv", "simulate")
    rows = read_workload_csv(sim_dir / "workload.csv")
    traces = read_trace_csv(sim_dir / "trace.csv")
    return join_traces(man.scenario, rows, traces)


@main.command()
@common_options
@_handle_errors
def preprocess(manifest_path, **flags):
    """Join traces into samples, split by simulation, fit standardizers."""
    man = resolve_manifest(manifest_path, **flags)
    sims = _load_suite(man)
    outdir = _scenario_dir(man) / "preprocess"
    outdir.mkdir(parents=True, exist_ok=True)

    train_sims = [s for s in sims if s["kind"] == "train"]
    split = split_train_eval({s["simulation_id"]: s["n_jobs"] for s in train_sims},
                             man.train_fraction, man.seed)
    train_table = _concat_tables([_load_sim_table(man, sid) for sid in split.train_ids])
    write_samples_csv(outdir / "train_samples.csv", train_table)
    if split.eval_ids:
        eval_table = _concat_tables([_load_sim_table(man, sid) for sid in split.eval_ids])
        write_samples_csv(outdir / "eval_samples.csv", eval_table)
    extra = [s["simulation_id"] for s in sims if s["kind"] == "extrapolation"]
    if extra:
        extra_table = _concat_tables([_load_sim_table(man, sid) for sid in extra])
        write_samples_csv(outdir / "extrapolation_samples.csv", extra_table)

    (outdir / "split.json").write_text(split.to_json(), encoding="utf-8")
    f_std = fit_standardizer(train_table.features, names=train_table.feature_names)
    t_std = fit_standardizer(train_table.targets, names=train_table.target_names)
    (outdir / "feature_std.json").write_text(f_std.to_json(), encoding="utf-8")
    (outdir / "target_std.json").write_text(t_std.to_json(), encoding="utf-8")
    _write_meta(outdir, "preprocess", man)
    click.echo(f"preprocessed {len(train_sims)} training simulations "
               f"({len(split.train_ids)} train / {len(split.eval_ids)} eval)")


def _load_preprocessed(man: ExperimentManifest):
    pre = _scenario_dir(man) / "preprocess"
    train_table = read_samples_csv(_require(pre / "train_samples.csv", "preprocess"))
    eval_path = pre / "eval_samples.csv"
    eval_table = read_samples_csv(eval_path) if eval_path.exists() else train_table
    f_std = Standardizer.from_json((pre / "feature_std.json").read_text(encoding="utf-8"))
    t_std = Standardizer.from_json((pre / "target_std.json").read_text(encoding="utf-8"))
    return train_table, eval_table, f_std, t_std


def _scaled(table: SampleTable, f_std: Standardizer, t_std: Standardizer) -> SampleTable:
    return SampleTable(table.scenario, table.simulation_ids, table.job_indices,
                       f_std.transform(table.features), t_std.transform(table.targets),
                       table.feature_names, table.target_names)


def _model_config(man: ExperimentManifest) -> ModelConfig:
    return ModelConfig(
        architecture=man.arch,
        input_dim=len(feature_names(man.scenario)),
        output_dim=len(TARGET_OBSERVABLES),
        hidden_size=man.hidden_size,
        num_layers=man.num_layers,
        window_size=man.window_size,
        window_overlap=man.window_overlap,
        batch_size=man.batch_size,
        num_heads=man.num_heads,
        seed=man.seed,
    )


@main.command()
@common_options
@click.option("--epochs", type=int, default=None, help="Override max_epochs.")
@click.option("--num-heads", type=int, default=None)
@_handle_errors
def train(manifest_path, epochs, num_heads, **flags):
    """Train one surrogate on the preprocessed samples; saves a checkpoint."""
    man = resolve_manifest(manifest_path, max_epochs=epochs, num_heads=num_heads, **flags)
    train_table, eval_table, f_std, t_std = _load_preprocessed(man)
    config = _model_config(man)
    train_batch = make_windows(_scaled(train_table, f_std, t_std),
                               config.window_size, config.window_overlap)
    eval_batch = make_windows(_scaled(eval_table, f_std, t_std),
                              config.window_size, config.window_overlap)
    params, history = train_model(
        TrainConfig(model=config, learning_rate=man.learning_rate,
                    max_epochs=man.max_epochs, patience=man.patience, seed=man.seed),
        train_batch, eval_batch)

    outdir = _scenario_dir(man) / "model"
    outdir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(outdir / "checkpoint.npz", Checkpoint(
        config=config, params=params, feature_std=f_std, target_std=t_std,
        scenario=man.scenario, seed=man.seed))
    with open(outdir / "history.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "eval_loss"])
        for h in history:
            w.writerow([h.epoch, repr(h.train_loss), repr(h.eval_loss)])
    _write_meta(outdir, "train", man)
    best = min(h.eval_loss for h in history)
    click.echo(f"trained {man.arch} for {len(history)} epochs; best eval MSE {best:.6g}")


@main.command()
@common_options
@click.option("--epochs", type=int, default=None, help="Per-trial epoch budget.")
@_handle_errors
def tune(manifest_path, epochs, **flags):
    """Two-stage hyperparameter search; writes an audit log and best config."""
    man = resolve_manifest(manifest_path, tune_max_epochs=epochs, **flags)
    train_table, eval_table, f_std, t_std = _load_preprocessed(man)
    scaled_train = _scaled(train_table, f_std, t_std)
    scaled_eval = _scaled(eval_table, f_std, t_std)

    def train_fn(config: ModelConfig) -> float:
        train_batch = make_windows(scaled_train, config.window_size, config.window_overlap)
        eval_batch = make_windows(scaled_eval, config.window_size, config.window_overlap)
        params, _ = train_model(
            TrainConfig(model=config, learning_rate=man.learning_rate,
                        max_epochs=man.tune_max_epochs, patience=man.patience,
                        seed=man.seed),
            train_batch, eval_batch)
        return evaluate_loss(config, params, eval_batch)

    space = SearchSpace(
        hidden_size=tuple(man.hidden_sizes),
        window_size=tuple(man.window_sizes),
        window_overlap=tuple(man.window_overlaps),
        num_layers=tuple(man.num_layers_options),
        batch_size=tuple(man.batch_sizes),
        num_heads=tuple(man.num_heads_options),
    )
    best_cfg, best_loss, audit = tune_hyperparameters(
        space, _model_config(man), train_fn, seed=man.seed,
        n_random=man.n_random, n_survivors=man.n_survivors)

    outdir = _scenario_dir(man) / "tune"
    outdir.mkdir(parents=True, exist_ok=True)
    write_audit_csv(outdir / "audit.csv", audit)
    (outdir / "best_config.json").write_text(
        json.dumps({"config": best_cfg.to_dict(), "eval_loss": best_loss}, indent=2),
        encoding="utf-8")
    _write_meta(outdir, "tune", man)
    click.echo(f"best config after {len(audit)} trials: eval MSE {best_loss:.6g}")


@main.command()
@common_options
@_handle_errors
def evaluate(manifest_path, **flags):
    """Score the trained surrogate: R-squared and KDE curves per observable."""
    man = resolve_manifest(manifest_path, **flags)
    ckpt_path = _require(_scenario_dir(man) / "model" / "checkpoint.npz", "train")
    ckpt = load_checkpoint(ckpt_path)
    pre = _scenario_dir(man) / "preprocess"
    eval_path = pre / "eval_samples.csv"
    table = read_samples_csv(_require(
        eval_path if eval_path.exists() else pre / "train_samples.csv", "preprocess"))
    report = evaluate_model(ckpt.config, ckpt.params, table,
                            ckpt.feature_std, ckpt.target_std, seed=man.seed)
    outdir = _scenario_dir(man) / "eval"
    write_report(outdir, report)
    _write_meta(outdir, "evaluate", man)
    for name, value in report.r2.items():
        click.echo(f"r2[{name}] = {value:.4f}")

    extra_path = pre / "extrapolation_samples.csv"
    if extra_path.exists():
        extra = read_samples_csv(extra_path)
        extra_report = evaluate_model(ckpt.config, ckpt.params, extra,
                                      ckpt.feature_std, ckpt.target_std, seed=man.seed)
        write_report(outdir / "extrapolation", extra_report)
        for name, value in extra_report.r2.items():
            click.echo(f"extrapolation r2[{name}] = {value:.4f}")


@main.command()
@common_options
@click.option("--repeats", type=int, default=None, help="Timing repeats per size.")
@_handle_errors
def bench(manifest_path, repeats, **flags):
    """Time simulator vs surrogate on each suite size; writes speedup.csv."""
    man = resolve_manifest(manifest_path, bench_repeats=repeats, **flags)
    ckpt = load_checkpoint(_require(_scenario_dir(man) / "model" / "checkpoint.npz",
                                    "train"))
    sizes = sorted({e.n_jobs for e in _suite(man)})
    platform = builtin_platform(man.scenario)
    entries = [SuiteEntry(n, 1, "bench") for n in sizes]
    sim_rows = bench_simulation(platform, man.scenario, entries, man.seed,
                                repeats=man.bench_repeats)
    sur_rows = []
    for n in sizes:
        jobs, datasets = generate_workload(man.scenario, n, 0, man.seed)
        traces = run_simulation(platform, jobs, datasets)
        table = join_traces(man.scenario, _workload_rows(jobs, datasets), traces)
        _, seconds = predict_rows(ckpt.config, ckpt.params, table,
                                  ckpt.feature_std, ckpt.target_std)
        sur_rows.append({"scenario": man.scenario, "n_jobs": n, "seconds": seconds})
    rows = speedup_report(sim_rows, sur_rows)
    outdir = _scenario_dir(man) / "bench"
    outdir.mkdir(parents=True, exist_ok=True)
    write_speedup_csv(outdir / "speedup.csv", rows)
    _write_meta(outdir, "bench", man)
    for r in rows:
        click.echo(f"n_jobs={r['n_jobs']}: {r['speedup']:.1f}x")


def _workload_rows(jobs, datasets) -> list[dict]:
    sizes = datasets.sizes()
    return [{
        "simulation_id": j.simulation_id,
        "job_index": j.job_index,
        "submission_time_s": j.submission_time_s,
        "flops": j.flops,
        "input_files": j.input_files,
        "input_files_size_bytes": sum(sizes[f] for f in j.input_files),
        "output_files_size_bytes": j.output_files_size_bytes,
        "class_id": j.class_id,
    } for j in jobs]


if __name__ == "__main__":
    main()
