"""Numeric substrate: least squares, symmetric eigensolver, k-means, RANSAC, seeding."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import DegenerateConfiguration, DegenerateSystem, NoConsensus, NoConvergence


# --------------------------------------------------------------------------- seeds


def derive_seed(seed: int, *names) -> int:
    """Deterministically derive a 64-bit child seed from ``seed`` and a path of names."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for name in names:
        h.update(b"/")
        h.update(str(name).encode())
    return int.from_bytes(h.digest(), "little")


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


# -------------------------------------------------------------------- least squares


def solve_least_squares(A, b, rank_tol: float = 1e-10):
    """Solve ``min ||Ax - b||`` with column-pivoted QR.

    ``b`` may be a vector or a matrix of right-hand sides. Returns
    ``(x, residual)`` where ``residual`` is the 2-norm (Frobenius for a
    matrix ``b``) of ``Ax - b``.
    Raises :class:`DegenerateSystem` if ``A`` is numerically rank deficient
    (``|R_ii| <= rank_tol * ||A||``).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"A must be 2-D, got shape {A.shape}")
    m, n = A.shape
    if b.shape[0] != m:
        raise ValueError(f"A has {m} rows but b has {b.shape[0]}")
    if m < n:
        raise DegenerateSystem(f"underdetermined system ({m} rows, {n} unknowns)")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValueError("A and b must be finite")
    scale = np.linalg.norm(A)
    Q, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(R))
    if scale == 0.0 or diag.min() <= rank_tol * scale:
        rank = int(np.sum(diag > rank_tol * scale)) if scale > 0 else 0
        raise DegenerateSystem(f"rank {rank} < {n}")
    y = scipy.linalg.solve_triangular(R, Q.T @ b, check_finite=False)
    x = np.empty_like(y)
    x[piv] = y
    residual = float(np.linalg.norm(A @ x - b))
    return x, residual


# ------------------------------------------------------------------ eigen solver


def eigen_symmetric(M, tol: float = 1e-13, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvalues sorted in
    descending order and eigenvectors as orthonormal columns.
    """
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.array_equal(A, A.T):
        raise ValueError("matrix is not symmetric")
    n = A.shape[0]
    V = np.eye(n)
    norm = np.linalg.norm(A)
    if n < 2 or norm == 0.0:
        return _sorted_eig(np.diag(A).copy(), V)

    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * norm:
            return _sorted_eig(np.diag(A).copy(), V)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-18 * norm:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                # A <- J^T A J, rotating rows/cols p and q
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")


def _sorted_eig(values, vectors):
    order = np.argsort(-values, kind="stable")
    return values[order], vectors[:, order]


# ------------------------------------------------------------------------ k-means


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    history: list = field(default_factory=list)


def kmeans_fit(points, k: int, seed: int = 0, max_iter: int = 100, n_init: int = 10) -> KMeansResult:
    """Lloyd's k-means with k-means++ seeding; best of ``n_init`` restarts by inertia.

    Empty clusters are repaired by moving their centre onto the point farthest
    from its current centre, so every returned cluster is non-empty.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = make_rng(seed)
    best = None
    for _ in range(max(1, n_init)):
        res = _lloyd(X, k, rng, max_iter)
        if best is None or res.inertia < best.inertia:
            best = res
    return best


def kmeans(points, k: int, seed: int = 0, max_iter: int = 100) -> np.ndarray:
    """Cluster labels in ``[0, k)``; deterministic for a given seed."""
    return kmeans_fit(points, k, seed=seed, max_iter=max_iter).labels


def _plusplus(X, k, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def _assign(X, centers):
    d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(X.shape[0]), labels]


def _lloyd(X, k, rng, max_iter):
    centers = _plusplus(X, k, rng)
    labels, dist = _assign(X, centers)
    history = [float(dist.sum())]
    for _ in range(max_iter):
        new_centers = centers.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new_centers[c] = X[members].mean(axis=0)
        # repair empty clusters with the worst-served points
        taken = set()
        for c in range(k):
            if not np.any(labels == c):
                order = np.argsort(-dist, kind="stable")
                idx = next(int(i) for i in order if int(i) not in taken)
                taken.add(idx)
                new_centers[c] = X[idx]
        new_labels, new_dist = _assign(X, new_centers)
        history.append(float(new_dist.sum()))
        done = np.array_equal(new_labels, labels) and np.allclose(new_centers, centers)
        centers, labels, dist = new_centers, new_labels, new_dist
        if done:
            break
    # final guarantee: no empty cluster
    for c in range(k):
        if not np.any(labels == c):
            counts = np.bincount(labels, minlength=k)
            donors = np.flatnonzero(counts > 1)
            cand = np.flatnonzero(np.isin(labels, donors))
            idx = cand[np.argmax(dist[cand])]
            labels[idx] = c
            dist[idx] = 0.0
            centers[c] = X[idx]
    return KMeansResult(labels=labels, centers=centers, inertia=float(dist.sum()), history=history)


# ------------------------------------------------------------------------- RANSAC


@dataclass(frozen=True)
class RansacConfig:
    max_iterations: int = 500
    inlier_threshold: float = 1.0
    min_inlier_ratio: float = 0.8
    seed: int = 0
    confidence: float = 0.999

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.inlier_threshold > 0:
            raise ValueError("inlier_threshold must be > 0")
        if not 0 < self.min_inlier_ratio <= 1:
            raise ValueError("min_inlier_ratio must lie in (0, 1]")


def ransac(
    data,
    fit: Callable,
    residuals: Callable,
    cfg: RansacConfig,
    sample_size: int,
    rng: np.random.Generator | None = None,
):
    """Robustly fit a model with RANSAC.

    ``fit(subset)`` returns a model or raises a degeneracy error for a bad
    sample; ``residuals(model, data)`` returns one distance per datum.
    Returns ``(model, inlier_mask)``. The winning hypothesis is refit on its
    inliers and the refit is kept only if it does not lose inliers.
    """
    data = np.asarray(data)
    n = len(data)
    if n < sample_size:
        raise DegenerateConfiguration(f"need at least {sample_size} data, got {n}")
    if rng is None:
        rng = make_rng(cfg.seed)

    best_model, best_mask, best_count = None, None, -1
    needed = cfg.max_iterations
    it = 0
    while it < min(cfg.max_iterations, needed):
        it += 1
        idx = rng.choice(n, size=sample_size, replace=False)
        try:
            model = fit(data[idx])
        except (DegenerateSystem, DegenerateConfiguration):
            continue
        mask = residuals(model, data) <= cfg.inlier_threshold
        count = int(mask.sum())
        if count > best_count:
            best_model, best_mask, best_count = model, mask, count
            needed = ransac_trials(count / n, sample_size, cfg.confidence)
            if count == n:
                break

    if best_model is None:
        raise DegenerateSystem("every sampled minimal set was degenerate")
    if best_count / n < cfg.min_inlier_ratio:
        raise NoConsensus(f"best inlier ratio {best_count / n:.3f} < {cfg.min_inlier_ratio}")

    if best_count > sample_size:
        try:
            refit = fit(data[best_mask])
        except (DegenerateSystem, DegenerateConfiguration):
            refit = None
        if refit is not None:
            mask = residuals(refit, data) <= cfg.inlier_threshold
            if mask.sum() >= best_count:
                best_model, best_mask = refit, mask
    return best_model, best_mask


def ransac_trials(inlier_ratio: float, s: int, confidence: float) -> int:
    """Trials needed to draw one all-inlier sample of size ``s`` with ``confidence``."""
    w = inlier_ratio**s
    if w <= 0.0:
        return 1 << 30
    if w >= 1.0:
        return 1
    return int(math.ceil(math.log(1.0 - confidence) / math.log(1.0 - w)))
