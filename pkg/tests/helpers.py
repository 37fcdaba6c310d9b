"""Shared fixtures for the pipeline tests: synthetic data and configs."""

import csv
import json
from pathlib import Path

import numpy as np

from reconc import harness

MONTHLY = {"bottom_period_count": 12, "factors": [2, 3, 4, 6, 12]}


def write_synthetic_observations(path: Path, n_years: int = 4, seed: int = 0) -> list[str]:
    """Seeded intermittent count series (sparse Poisson plus one NB-ish mix)."""
    rng = np.random.default_rng(seed)
    t_len = 12 * n_years
    series = {
        "sparse_a": rng.poisson(0.6, size=t_len),
        "sparse_b": rng.poisson(1.2, size=t_len) * rng.binomial(1, 0.55, size=t_len),
        "bursty": rng.negative_binomial(0.8, 0.35, size=t_len),
    }
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series_id", "t", "value"])
        for sid, values in series.items():
            for t, v in enumerate(values):
                writer.writerow([sid, t, int(v)])
    return sorted(series)


def write_config(path: Path, **overrides) -> Path:
    cfg = {
        "hierarchy": MONTHLY,
        "observations": "obs.csv",
        "forecasts": harness.BUILTIN_FORECASTER,
        "sampler": {"chains": 2, "draws": 400, "thin": 5, "seed": 1},
        "scoring": {"alpha": 0.1, "es_batch": 300, "baseline": "normal"},
    }
    cfg.update(overrides)
    path.write_text(json.dumps(cfg))
    return path


def run_benchmark(tmp_path: Path, methods=("probCount_mcmc", "normal", "base")):
    """Reconcile the synthetic dataset with several methods, then score."""
    tmp_path.mkdir(parents=True, exist_ok=True)
    obs = tmp_path / "obs.csv"
    write_synthetic_observations(obs)
    method_dirs = {}
    for method in methods:
        cfg_path = write_config(
            tmp_path / f"cfg_{method}.json", method=method, output_dir=f"out_{method}",
        )
        out = harness.run_reconcile(harness.load_config(cfg_path), quiet=True)
        method_dirs[method] = str(out)
    score_cfg = write_config(
        tmp_path / "cfg_score.json", methods=method_dirs, output_dir="out_scores",
    )
    return harness.run_score(harness.load_config(score_cfg), quiet=True)
