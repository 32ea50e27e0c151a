"""Merging 2C fine motion models into C motions.

Pairs of fine models vote for each other through randomly drawn atoms:
a fundamental matrix fitted to two atoms from each model explains both
models only if they share a rigid motion. The votes, damped by how
differently the models' mean trajectories move, accumulate in an affinity
matrix that is split by normalised spectral clustering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atoms import valid_frame_pairs
from .data import TrajectorySet
from .errors import DegenerateConfiguration
from .geometry import estimate_fundamental, sampson_distances
from .numerics import derive_seed, eigen_symmetric, kmeans, make_rng

SIGMA_FLOOR = 0.1


@dataclass(frozen=True, eq=False)
class MotionModel:
    id: int
    atom_ids: tuple
    feature_ids: np.ndarray
    mean_trajectory: np.ndarray  # (L, 2)


@dataclass(frozen=True)
class VotingParams:
    lambda_vote: float = 2.0
    lambda_affinity: float = 0.5
    rounds: int = 30
    frames_used: int = 7
    seed: int = 0

    def __post_init__(self):
        if self.frames_used < 2 or self.rounds < 1:
            raise ValueError("need frames_used >= 2 and rounds >= 1")
        if self.lambda_vote <= 0 or self.lambda_affinity <= 0:
            raise ValueError("lambdas must be > 0")


def build_models(atoms, fine_labels, num_models: int) -> list:
    models = []
    fine_labels = np.asarray(fine_labels)
    for m in range(num_models):
        ids = tuple(int(i) for i in np.flatnonzero(fine_labels == m))
        if not ids:
            raise ValueError(f"fine model {m} has no atoms")
        feats = np.unique(np.concatenate([atoms[i].feature_ids for i in ids]))
        mean_traj = np.mean([atoms[i].centroid_per_frame for i in ids], axis=0)
        models.append(MotionModel(m, ids, feats, mean_traj))
    return models


def flow_sigma(atoms, frames: int) -> np.ndarray:
    """Per-frame RMS of atom-centroid displacements (index 0 unused), floored."""
    cents = np.array([a.centroid_per_frame for a in atoms])  # (N, L, 2)
    disp = np.diff(cents, axis=1)
    rms = np.sqrt(np.mean(np.sum(disp**2, axis=2), axis=0))
    return np.concatenate([[SIGMA_FLOOR], np.maximum(rms, SIGMA_FLOOR)])


def motion_distance(model_a: MotionModel, model_b: MotionModel, t: int, sigma_t: float) -> float:
    """``||dA - dB|| / sigma_t`` for the mean-trajectory displacements at frame t."""
    L = model_a.mean_trajectory.shape[0]
    if not 1 <= t < L:
        raise ValueError(f"t must lie in [1, {L}), got {t}")
    da = model_a.mean_trajectory[t] - model_a.mean_trajectory[t - 1]
    db = model_b.mean_trajectory[t] - model_b.mean_trajectory[t - 1]
    return float(np.linalg.norm(da - db) / sigma_t)


def _pick_atoms(model: MotionModel, rng):
    ids = np.array(model.atom_ids)
    if len(ids) >= 2:
        return rng.choice(ids, size=2, replace=False)
    return ids


def epipolar_pair_distance(model_j, model_k, frame_pair, traj: TrajectorySet, atoms, rng) -> float:
    """Epipolar disagreement of two models over one random draw of atoms.

    Two atoms are drawn from each model and F is fitted to their pooled
    correspondences between the frames of ``frame_pair``. All features of
    each model are scored by Sampson distance under F; the larger of the
    two mean distances is returned.
    """
    if not isinstance(rng, np.random.Generator):
        rng = make_rng(rng)
    l, r = frame_pair
    pj = np.unique(np.concatenate([atoms[i].feature_ids for i in _pick_atoms(model_j, rng)]))
    pk = np.unique(np.concatenate([atoms[i].feature_ids for i in _pick_atoms(model_k, rng)]))
    pooled = np.union1d(pj, pk)
    F = estimate_fundamental(traj.points[pooled, l], traj.points[pooled, r], frame_pair)
    fj, fk = model_j.feature_ids, model_k.feature_ids
    djk = sampson_distances(F, traj.points[fj, l], traj.points[fj, r])
    dkj = sampson_distances(F, traj.points[fk, l], traj.points[fk, r])
    if np.all(np.isnan(djk)) or np.all(np.isnan(dkj)):
        raise DegenerateConfiguration("every sampled feature sits at an epipole")
    return float(max(np.nanmean(djk), np.nanmean(dkj)))


def affinity_contribution(d_epipolar: float, d_motion: float, lam: float) -> float:
    """One round's vote: decays with the product of both distances."""
    return float(np.exp(-lam * d_epipolar * d_motion))


def accumulate_affinity(models, traj: TrajectorySet, atoms, params: VotingParams, separation: int | None = None):
    """Accumulate the symmetric model affinity matrix Z.

    Labels are never changed during accumulation. Degenerate rounds are
    skipped. The diagonal is set to the largest off-diagonal entry.
    """
    n = len(models)
    L = traj.frame_count
    sep = separation if separation is not None else max(1, L // 3)
    sep = min(sep, L - 1)
    pairs = valid_frame_pairs(L, sep)
    sigma = flow_sigma(atoms, L)
    Z = np.zeros((n, n))
    for j in range(n):
        for k in range(j + 1, n):
            rng = make_rng(derive_seed(params.seed, "affinity", j, k))
            total = 0.0
            for _ in range(params.rounds):
                frame_pair = pairs[rng.integers(len(pairs))]
                try:
                    d_ep = epipolar_pair_distance(models[j], models[k], frame_pair, traj, atoms, rng)
                except DegenerateConfiguration:
                    continue
                ts = rng.choice(np.arange(1, L), size=min(params.frames_used, L - 1), replace=False)
                d_mot = np.mean([motion_distance(models[j], models[k], int(t), sigma[t]) for t in ts])
                total += affinity_contribution(d_ep, d_mot, params.lambda_affinity)
            Z[j, k] = Z[k, j] = total
    off = Z[~np.eye(n, dtype=bool)]
    diag = off.max() if off.size and off.max() > 0 else 1.0
    np.fill_diagonal(Z, diag)
    return Z


def spectral_embedding(Z, C: int) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    d = Z.sum(axis=1)
    inv = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    N = inv[:, None] * Z * inv[None, :]
    N = (N + N.T) / 2.0
    _, vecs = eigen_symmetric(N)
    U = vecs[:, :C]
    norms = np.linalg.norm(U, axis=1, keepdims=True)
    return U / np.where(norms > 0, norms, 1.0)


def coarsen(models, Z, C: int, seed: int = 0) -> np.ndarray:
    """Group fine models into C motions by normalised spectral clustering of Z."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    if Z.shape != (n, n) or not np.allclose(Z, Z.T) or np.any(Z < 0):
        raise ValueError("Z must be a square, symmetric, non-negative matrix")
    if C == 1:
        return np.zeros(n, dtype=int)
    U = spectral_embedding(Z, C)
    labels = kmeans(U, C, seed=seed)
    # canonical order: first appearance
    mapping: dict = {}
    return np.array([mapping.setdefault(int(x), len(mapping)) for x in labels], dtype=int)
