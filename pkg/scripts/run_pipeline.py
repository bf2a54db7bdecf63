#!/usr/bin/env python3
"""Run the full pipeline (simulate, preprocess, train, evaluate, bench) for
one scenario via the CLI, sharing a single manifest across stages.

Usage:
    python scripts/run_pipeline.py --scenario heterogeneous --out out --seed 0
    python scripts/run_pipeline.py --manifest manifest.json
"""

import json
import sys
import tempfile

import click

from simsurrogate.cli import main as cli


@click.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), default=None)
@click.option("--scenario", default="heterogeneous")
@click.option("--out", default="out")
@click.option("--seed", default=0, type=int)
@click.option("--arch", default="bigru")
@click.option("--jobs", default=1, type=int, help="parallel simulation workers")
def run(manifest_path, scenario, out, seed, arch, jobs):
    if manifest_path is None:
        doc = {"scenario": scenario, "out": out, "seed": seed, "arch": arch,
               "jobs": jobs}
        tmp = tempfile.NamedTemporaryFile("w", suffix=".json", delete=False)
        json.dump(doc, tmp)
        tmp.close()
        manifest_path = tmp.name
    for stage in ("simulate", "preprocess", "train", "evaluate", "bench"):
        click.echo(f"== {stage} ==")
        code = cli.main([stage, "--manifest", manifest_path], standalone_mode=False)
        if code not in (0, None):
            sys.exit(code)


if __name__ == "__main__":
    run()
