"""Atom construction: small neighbourhoods of features sharing one affine motion."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import TrajectorySet
from .errors import DegenerateConfiguration, DegenerateSystem, NoConsensus
from .geometry import AffineTransform, affine_residuals, fit_affine
from .numerics import RansacConfig, ransac_trials, derive_seed, make_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AtomConstructionConfig:
    r1: float = 20.0
    r2: float = 40.0
    min_frame_separation: int | None = None  # None: max(2, L // 3)
    ransac: RansacConfig = field(default_factory=RansacConfig)
    max_passes: int = 3
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.r1 <= self.r2:
            raise ValueError(f"need 0 < r1 <= r2, got r1={self.r1}, r2={self.r2}")
        if self.min_frame_separation is not None and self.min_frame_separation < 1:
            raise ValueError("min_frame_separation must be >= 1")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")

    def separation(self, frames: int) -> int:
        if self.min_frame_separation is not None:
            return self.min_frame_separation
        return max(2, frames // 3)


@dataclass(frozen=True, eq=False)
class Atom:
    id: int
    feature_ids: np.ndarray  # sorted feature indices, >= 3 of them
    origin_feature: int
    frame_pair: tuple
    transform: AffineTransform
    centroid_per_frame: np.ndarray  # (L, 2)

    def __len__(self):
        return len(self.feature_ids)

    def __eq__(self, other):
        if not isinstance(other, Atom):
            return NotImplemented
        return (
            self.id == other.id
            and np.array_equal(self.feature_ids, other.feature_ids)
            and self.origin_feature == other.origin_feature
            and self.frame_pair == other.frame_pair
            and np.array_equal(self.transform.matrix, other.transform.matrix)
        )


def valid_frame_pairs(frames: int, separation: int) -> list:
    return [(l, r) for l in range(frames) for r in range(l + separation, frames)]


def affine_ransac(src, dst, cfg: RansacConfig, rng=None, batch: int = 64):
    """RANSAC for an affine map ``src -> dst`` with vectorised hypotheses.

    Same contract as :func:`laav.numerics.ransac` with 3-point minimal
    samples: the hypothesis with most inliers wins, the trial budget adapts
    to the best inlier ratio, and the winner is refit on its inliers if that
    does not lose any. Returns ``(AffineTransform, inlier_mask)``.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    n = len(src)
    if n < 3:
        raise DegenerateConfiguration(f"need at least 3 correspondences, got {n}")
    if rng is None:
        rng = make_rng(cfg.seed)
    mu = src.mean(axis=0)
    scale = np.sqrt(np.mean(np.sum((src - mu) ** 2, axis=1)))
    if scale == 0.0:
        raise DegenerateSystem("coincident source points")
    X = np.hstack([(src - mu) / scale, np.ones((n, 1))])

    best_P, best_mask, best_count = None, None, -1
    needed, it = cfg.max_iterations, 0
    while it < min(cfg.max_iterations, needed):
        b = min(batch, cfg.max_iterations - it)
        idx = np.argsort(rng.random((b, n)), axis=1)[:, :3]
        S = X[idx]
        ok = np.abs(np.linalg.det(S)) > 1e-9
        P = np.zeros((b, 3, 2))
        if ok.any():
            P[ok] = np.linalg.solve(S[ok], dst[idx[ok]])
        res = np.linalg.norm(X @ P - dst, axis=2)  # (b, n)
        masks = res <= cfg.inlier_threshold
        counts = masks.sum(axis=1)
        for k in range(b):
            it += 1
            if ok[k] and counts[k] > best_count:
                best_P, best_mask, best_count = P[k], masks[k], int(counts[k])
                needed = ransac_trials(best_count / n, 3, cfg.confidence)
            if best_count == n or it >= needed:
                break
        if best_count == n:
            break

    if best_P is None:
        raise DegenerateSystem("every sampled minimal set was degenerate")
    if best_count / n < cfg.min_inlier_ratio:
        raise NoConsensus(f"best inlier ratio {best_count / n:.3f} < {cfg.min_inlier_ratio}")
    lin = best_P[:2].T / scale
    model = AffineTransform(np.hstack([lin, (best_P[2] - lin @ mu)[:, None]]))
    if best_count > 3:
        try:
            refit = fit_affine(src[best_mask], dst[best_mask])
        except DegenerateConfiguration:
            refit = None
        if refit is not None:
            mask = affine_residuals(refit, src, dst) <= cfg.inlier_threshold
            if mask.sum() >= best_count:
                model, best_mask = refit, mask
    return model, best_mask


def build_atoms(traj: TrajectorySet, cfg: AtomConstructionConfig):
    """Construct atoms sequentially.

    For each randomly ordered seed feature not yet joined to an atom, a
    random frame pair (l, r) is drawn, every still-joinable feature within
    ``r2`` of the seed at frame l is gathered, and RANSAC tests the set for
    an affine consensus. On success the inliers form an atom and those of
    them closer than ``r1`` to the seed may not join any later atom.

    Returns ``(atoms, unassigned)`` where ``unassigned`` is the set of
    feature ids contained in no atom.
    """
    K, L = traj.feature_count, traj.frame_count
    sep = cfg.separation(L)
    if K < 3 or L <= sep:
        return [], set(range(K))
    pairs = valid_frame_pairs(L, sep)
    rng = make_rng(derive_seed(cfg.seed, "atoms"))

    atoms: list[Atom] = []
    excluded = np.zeros(K, dtype=bool)
    joined = np.zeros(K, dtype=bool)
    for _ in range(cfg.max_passes):
        created = 0
        candidates = np.flatnonzero(~excluded & ~joined)
        for seed_f in rng.permutation(candidates):
            if excluded[seed_f] or joined[seed_f]:
                continue
            l, r = pairs[rng.integers(len(pairs))]
            P = traj.points[:, l, :]
            dist = np.linalg.norm(P - P[seed_f], axis=1)
            nbrs = np.flatnonzero((dist <= cfg.r2) & ~excluded)
            if len(nbrs) < 3:
                continue
            try:
                model, mask = affine_ransac(
                    P[nbrs], traj.points[nbrs, r, :], cfg.ransac, rng=make_rng(rng.integers(2**63))
                )
            except (NoConsensus, DegenerateSystem, DegenerateConfiguration):
                continue
            members = nbrs[mask]
            if seed_f not in members or len(members) < 3:
                continue
            transform = AffineTransform(model.matrix, l, r)
            atom = Atom(
                id=len(atoms),
                feature_ids=np.sort(members),
                origin_feature=int(seed_f),
                frame_pair=(int(l), int(r)),
                transform=transform,
                centroid_per_frame=traj.points[members].mean(axis=0),
            )
            atoms.append(atom)
            created += 1
            joined[members] = True
            excluded[members[dist[members] < cfg.r1]] = True
        if created == 0 or joined.all():
            break
    unassigned = set(np.flatnonzero(~joined).tolist())
    log.debug("built %d atoms, %d features unassigned", len(atoms), len(unassigned))
    return atoms, unassigned


def atom_overlap_graph_edges(atoms, k_neighbors: int = 4, reference_frame: int = 0) -> list:
    """Undirected edges ``(i, j)`` with ``i < j`` between atom indices.

    Each atom is linked to its ``k_neighbors`` nearest atoms by centroid
    distance at ``reference_frame`` and to every atom it shares a feature with.
    """
    n = len(atoms)
    if n < 2:
        return []
    edges = set()
    cents = np.array([a.centroid_per_frame[reference_frame] for a in atoms])
    d = np.linalg.norm(cents[:, None, :] - cents[None, :, :], axis=2)
    np.fill_diagonal(d, np.inf)
    k = min(k_neighbors, n - 1)
    for i in range(n):
        for j in np.argsort(d[i], kind="stable")[:k]:
            edges.add((min(i, int(j)), max(i, int(j))))
    owner: dict = {}
    for i, a in enumerate(atoms):
        for f in a.feature_ids.tolist():
            owner.setdefault(f, []).append(i)
    for holders in owner.values():
        for x in range(len(holders)):
            for y in range(x + 1, len(holders)):
                edges.add((holders[x], holders[y]))
    return sorted(edges)


def feature_atom_membership(atoms, K: int) -> list:
    """For each feature, the list of atom indices containing it."""
    out = [[] for _ in range(K)]
    for i, a in enumerate(atoms):
        for f in a.feature_ids.tolist():
            out[f].append(i)
    return out
