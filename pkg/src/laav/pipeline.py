"""End-to-end segmentation: atoms -> multicut (2C) -> fine-to-coarse (C) -> voting."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import dataio
from .atoms import AtomConstructionConfig, build_atoms, feature_atom_membership
from .data import ATOM, RV, UNLABELED, Labeling, TrajectorySet
from .dataio import NoiseSpec, add_noise, misclassification_error
from .errors import InsufficientAtoms
from .fine2coarse import VotingParams, accumulate_affinity, build_models, coarsen
from .multicut import MulticutConfig, fine_models_from_atoms
from .numerics import derive_seed
from .rv import MIN_GROUP, RvParams, finetune

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    num_motions: int = 0  # 0: take C from the trajectory set
    seed: int = 0
    atoms: AtomConstructionConfig = field(default_factory=AtomConstructionConfig)
    multicut: MulticutConfig = field(default_factory=MulticutConfig)
    voting: VotingParams = field(default_factory=VotingParams)
    rv: RvParams = field(default_factory=RvParams)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    rv_init: str = "atoms"
    stage_dump: str | None = None

    def __post_init__(self):
        if self.rv_init not in ("atoms", "random"):
            raise ValueError(f"rv_init must be 'atoms' or 'random', got {self.rv_init!r}")

    def stage_seeds(self) -> "PipelineConfig":
        """Copy with every module seed derived from the top-level seed."""
        s = self.seed
        return replace(
            self,
            atoms=replace(self.atoms, seed=derive_seed(s, "atoms")),
            voting=replace(self.voting, seed=derive_seed(s, "fine2coarse")),
            rv=replace(self.rv, seed=derive_seed(s, "rv")),
        )


@dataclass
class SegmentationResult:
    labeling: Labeling
    num_motions: int
    iterations_used: int
    converged: bool
    atoms: list = field(default_factory=list)
    fine_atom_labels: np.ndarray | None = None
    coarse_model_labels: np.ndarray | None = None
    affinity: np.ndarray | None = None
    fine_feature_labels: np.ndarray | None = None
    coarse_feature_labels: np.ndarray | None = None
    fallback: str | None = None


def _feature_vote(atom_labels, membership, K):
    """Majority label over the atoms containing each feature (-1 if none)."""
    out = np.full(K, UNLABELED)
    for f in range(K):
        if membership[f]:
            votes = np.bincount([atom_labels[i] for i in membership[f]])
            out[f] = int(np.argmax(votes))
    return out


def segment(traj: TrajectorySet, cfg: PipelineConfig = PipelineConfig()) -> SegmentationResult:
    """Label every trajectory with one of C motions."""
    C = cfg.num_motions or traj.num_motions
    if C < 1:
        raise ValueError("number of motions C must be given (> 0)")
    if traj.feature_count < MIN_GROUP * C:
        raise InsufficientAtoms(f"{traj.feature_count} features cannot carry {C} motions of >= {MIN_GROUP} features")
    if cfg.noise.sigma_n > 0:
        traj = add_noise(traj, cfg.noise)
    cfg = cfg.stage_seeds()
    K = traj.feature_count

    if cfg.rv_init == "random":
        res = finetune(traj, Labeling.unlabeled(K), C, cfg.rv, init="random")
        return SegmentationResult(res.labeling, C, res.iterations_used, res.converged)

    atoms, _ = build_atoms(traj, cfg.atoms)
    result = SegmentationResult(Labeling.unlabeled(K), C, 0, False, atoms=atoms)
    initial = Labeling.unlabeled(K)
    try:
        fine, _ = fine_models_from_atoms(atoms, traj, 2 * C, cfg.multicut)
    except InsufficientAtoms as exc:
        # too few atoms (typically heavy noise): plain voting from random labels
        log.info("falling back to random initialisation: %s", exc)
        result.fallback = str(exc)
    else:
        models = build_models(atoms, fine, 2 * C)
        Z = accumulate_affinity(models, traj, atoms, cfg.voting, cfg.atoms.separation(traj.frame_count))
        coarse = coarsen(models, Z, C, seed=derive_seed(cfg.seed, "coarsen"))
        membership = feature_atom_membership(atoms, K)
        result.fine_atom_labels = fine
        result.coarse_model_labels = coarse
        result.affinity = Z
        result.fine_feature_labels = _feature_vote(fine, membership, K)
        result.coarse_feature_labels = _feature_vote(coarse[fine], membership, K)
        labeled = result.coarse_feature_labels != UNLABELED
        initial = Labeling(
            result.coarse_feature_labels,
            labeled.astype(float),
            np.where(labeled, ATOM, RV).astype(object),
        )

    res = finetune(traj, initial, C, cfg.rv, init="atoms")
    result.labeling = res.labeling
    result.iterations_used = res.iterations_used
    result.converged = res.converged
    return result


def metrics_for(result: SegmentationResult, traj: TrajectorySet, seed: int) -> dict:
    err = math.nan
    if traj.ground_truth is not None:
        err = misclassification_error(result.labeling, traj.ground_truth, result.num_motions)
    return {
        "error_total": err,
        "error_2motion": err if result.num_motions == 2 else math.nan,
        "error_3motion": err if result.num_motions == 3 else math.nan,
        "iterations": result.iterations_used,
        "converged": bool(result.converged),
        "seed": seed,
    }


def stage_labelings(result: SegmentationResult) -> dict:
    """Per-feature label snapshots after each stage, keyed by file stem."""
    K = len(result.labeling)
    out = {}
    for name, labels in (
        ("stage_d_fine", result.fine_feature_labels),
        ("stage_e_coarse", result.coarse_feature_labels),
    ):
        if labels is None:
            labels = np.full(K, UNLABELED)
        src = np.where(labels != UNLABELED, ATOM, RV).astype(object)
        out[name] = Labeling(labels, (labels != UNLABELED).astype(float), src)
    out["stage_f_final"] = result.labeling
    return out


def dump_stages(result: SegmentationResult, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    for name, lab in stage_labelings(result).items():
        dataio.save_labeling(lab, os.path.join(directory, name + ".labels"))
