"""Randomized voting that finishes the labeling.

Each iteration draws a frame pair, fits one fundamental matrix per group
from ``m`` of the group's current members, and adds ``exp(-lambda * SD)``
to every feature's score for that group. The scores decay by ``alpha``
per iteration and each feature takes the label with the highest score.
Features labeled by the atom stages start locked: they are favoured when
sampling, their own label's votes are up-weighted, and they only flip on
a clear margin.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .atoms import valid_frame_pairs
from .data import ATOM, RV, UNLABELED, Labeling, TrajectorySet
from .errors import DegenerateConfiguration, GroupCollapse
from .geometry import estimate_fundamental, sampson_distances
from .numerics import derive_seed, make_rng

log = logging.getLogger(__name__)

MIN_GROUP = 8
# finite stand-in for an infinite locked_weight when sampling and scoring
_WEIGHT_CAP = 1e12


@dataclass(frozen=True)
class RvParams:
    m: int = 12
    lambda_vote: float = 4.0
    alpha: float = 0.9
    max_iterations: int = 150
    max_trials: int = 10
    seed: int = 0
    locked_weight: float = 5.0
    flip_ratio: float = 2.0
    stable_iterations: int = 3
    min_frame_separation: int | None = None

    def __post_init__(self):
        if self.m < MIN_GROUP:
            raise ValueError(f"m must be >= {MIN_GROUP}")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.lambda_vote <= 0:
            raise ValueError("lambda_vote must be > 0")
        if self.locked_weight < 1:
            raise ValueError("locked_weight must be >= 1")
        if self.max_iterations < 1 or self.max_trials < 1:
            raise ValueError("max_iterations and max_trials must be >= 1")


@dataclass
class VoteHistogram:
    scores: np.ndarray  # (K, C), non-negative
    locked_weight: float = 1.0

    @classmethod
    def zeros(cls, K: int, C: int, locked_weight: float = 1.0):
        return cls(np.zeros((K, C)), locked_weight)


@dataclass
class FinetuneResult:
    labeling: Labeling
    iterations_used: int
    converged: bool
    trials: int


def vote_round(hist: VoteHistogram, fundamentals, traj: TrajectorySet, frame_pair, params: RvParams, weights=None):
    """Decay the scores by alpha and add one round of Sampson votes.

    ``fundamentals`` holds one F per group (``None`` skips the group).
    Features whose Sampson distance is undefined are skipped.
    """
    l, r = frame_pair
    new = params.alpha * hist.scores
    yl, yr = traj.points[:, l, :], traj.points[:, r, :]
    for c, F in enumerate(fundamentals):
        if F is None:
            continue
        sd = sampson_distances(F, yl, yr)
        ok = ~np.isnan(sd)
        add = np.exp(-params.lambda_vote * sd[ok])
        if weights is not None:
            add = add * weights[ok, c]
        new[ok, c] += add
    return VoteHistogram(new, hist.locked_weight)


def _sample_group(members, locked, params, rng):
    w = np.where(locked[members], min(params.locked_weight, _WEIGHT_CAP), 1.0)
    size = min(params.m, len(members))
    return rng.choice(members, size=size, replace=False, p=w / w.sum())


def finetune(traj: TrajectorySet, initial: Labeling, C: int, params: RvParams, init: str = "atoms") -> FinetuneResult:
    """Label every feature by randomized voting.

    ``init="atoms"`` starts from ``initial`` (labeled features are locked,
    the rest start random); ``init="random"`` ignores it and starts every
    feature at a random label. Counts iterations across trials; a trial
    that does not converge adds ``max_iterations``.
    """
    if init not in ("atoms", "random"):
        raise ValueError(f"unknown init mode {init!r}")
    K, L = traj.feature_count, traj.frame_count
    if C < 1:
        raise ValueError("C must be >= 1")
    sep = params.min_frame_separation or max(1, L // 3)
    pairs = valid_frame_pairs(L, min(sep, L - 1))

    if init == "atoms":
        held = initial.labels.copy()
        locked = held != UNLABELED
    else:
        held = np.full(K, UNLABELED)
        locked = np.zeros(K, dtype=bool)
    if np.any(held[locked] >= C):
        raise ValueError("initial labels must lie in [0, C)")
    if C == 1:
        labels = np.zeros(K, dtype=int)
        return FinetuneResult(Labeling(labels, np.ones(K), np.where(locked & (held == 0), ATOM, RV).astype(object)), 0, True, 0)

    total_iters = 0
    last = None
    for trial in range(params.max_trials):
        rng = make_rng(derive_seed(params.seed, "rv-trial", trial))
        labels = np.where(locked, held, rng.integers(0, C, size=K))
        hist = VoteHistogram.zeros(K, C, params.locked_weight)
        weights = np.ones((K, C))
        weights[np.flatnonzero(locked), held[locked]] = min(params.locked_weight, _WEIGHT_CAP)
        stable = 0
        converged = False
        it = 0
        try:
            for it in range(1, params.max_iterations + 1):
                pair = pairs[rng.integers(len(pairs))]
                Fs = []
                for c in range(C):
                    members = np.flatnonzero(labels == c)
                    if len(members) < MIN_GROUP:
                        raise GroupCollapse(f"group {c} has {len(members)} members")
                    pick = _sample_group(members, locked, params, rng)
                    try:
                        Fs.append(estimate_fundamental(traj.points[pick, pair[0]], traj.points[pick, pair[1]], pair))
                    except DegenerateConfiguration:
                        Fs.append(None)
                hist = vote_round(hist, Fs, traj, pair, params, weights)
                new = _relabel(hist.scores, labels, locked, held, params.flip_ratio, np.isinf(params.locked_weight))
                if np.array_equal(new, labels):
                    stable += 1
                else:
                    stable = 0
                labels = new
                if stable >= params.stable_iterations:
                    converged = True
                    break
        except GroupCollapse as exc:
            log.debug("trial %d restarted: %s", trial, exc)
            total_iters += params.max_iterations
            continue
        last = (labels, hist)
        if converged:
            total_iters += it
            return FinetuneResult(_labeling(labels, hist, locked, held), total_iters, True, trial + 1)
        total_iters += params.max_iterations

    if last is None:
        labels = np.where(locked, held, 0)
        hist = VoteHistogram.zeros(K, C)
    else:
        labels, hist = last
    return FinetuneResult(_labeling(labels, hist, locked, held), total_iters, False, params.max_trials)


def _relabel(scores, labels, locked, held, flip_ratio, frozen=False):
    best = np.argmax(scores, axis=1)
    has_votes = scores.max(axis=1) > 0
    new = np.where(has_votes, best, labels)
    idx = np.flatnonzero(locked)
    if idx.size:
        own = scores[idx, held[idx]]
        top = scores[idx, best[idx]]
        # an infinite lock weight is the limit in which no lock ever flips;
        # finite weights can still lose to exp() underflowing to zero
        flip = (top > flip_ratio * own) & (not frozen)
        new[idx] = np.where(flip, best[idx], held[idx])
    return new


def _labeling(labels, hist, locked, held):
    s = hist.scores
    tot = s.sum(axis=1)
    conf = np.where(tot > 0, s[np.arange(len(labels)), labels] / np.where(tot > 0, tot, 1.0), 0.0)
    source = np.where(locked & (labels == held), ATOM, RV).astype(object)
    return Labeling(labels.astype(int), conf, source)
