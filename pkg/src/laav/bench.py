"""Noise and initialisation studies over repeated seeded runs."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import TrajectorySet
from .dataio import NoiseSpec, misclassification_error
from .numerics import derive_seed
from .pipeline import PipelineConfig, segment

ARMS = ("atoms", "random")


@dataclass(frozen=True)
class BenchRow:
    arm: str
    sigma: float
    rep: int
    scene: int
    accuracy: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class BenchSummary:
    arm: str
    sigma: float
    runs: int
    mean_accuracy: float
    std_accuracy: float
    median_iterations: float
    convergence_rate: float


def run_once(traj: TrajectorySet, sigma: float, rep: int, cfg: PipelineConfig, arm: str) -> BenchRow:
    """One repetition: noise and pipeline seeds are derived from (seed, sigma, rep)."""
    run_cfg = replace(
        cfg,
        seed=derive_seed(cfg.seed, "rep", rep),
        noise=NoiseSpec(sigma, derive_seed(cfg.seed, "noise", repr(float(sigma)), rep)),
        rv_init=arm,
    )
    res = segment(traj, run_cfg)
    err = misclassification_error(res.labeling, traj.ground_truth, res.num_motions)
    return BenchRow(arm, float(sigma), rep, 0, 1.0 - err, res.iterations_used, bool(res.converged))


def bench_noise(scenes, sigmas, reps: int, cfg: PipelineConfig = PipelineConfig(), arms=ARMS) -> list:
    """Rows ordered by (arm, sigma, rep, scene)."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    for t in scenes:
        if t.ground_truth is None:
            raise ValueError("bench scenes need ground truth")
    rows = []
    for arm in arms:
        for sigma in sigmas:
            for rep in range(reps):
                for s, traj in enumerate(scenes):
                    row = run_once(traj, sigma, rep, replace(cfg, seed=derive_seed(cfg.seed, "scene", s)), arm)
                    rows.append(replace(row, scene=s))
    return rows


def summarise(rows) -> list:
    """Mean/std accuracy, median iterations and convergence rate per (arm, sigma)."""
    keys = []
    for r in rows:
        if (r.arm, r.sigma) not in keys:
            keys.append((r.arm, r.sigma))
    out = []
    for arm, sigma in keys:
        sel = [r for r in rows if r.arm == arm and r.sigma == sigma]
        acc = np.array([r.accuracy for r in sel])
        out.append(
            BenchSummary(
                arm,
                sigma,
                len(sel),
                float(acc.mean()),
                float(acc.std()),
                float(np.median([r.iterations for r in sel])),
                float(np.mean([r.converged for r in sel])),
            )
        )
    return out
