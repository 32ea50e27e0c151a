"""Two-view geometry: affine transforms, fundamental matrices, Sampson distance.

Point sets are ``(N, 2)`` arrays of pixel coordinates; homogeneous
coordinates (w = 1) are added internally where needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration, DegenerateSystem, ZeroDenominator
from .numerics import solve_least_squares


def as_points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim == 1:
        p = p[None, :]
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError(f"expected (N, 2) points, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("points must be finite")
    return p


def homogenise(p) -> np.ndarray:
    p = as_points(p)
    return np.hstack([p, np.ones((p.shape[0], 1))])


# ------------------------------------------------------------------------ affine


@dataclass(frozen=True)
class AffineTransform:
    """2-D affine map ``x -> linear @ x + translation`` between two frames."""

    matrix: np.ndarray  # (2, 3): [linear | translation]
    source_frame: int = 0
    target_frame: int = 1

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (2, 3):
            raise ValueError(f"affine matrix must be 2x3, got {m.shape}")
        if abs(np.linalg.det(m[:, :2])) <= 1e-12:
            raise DegenerateConfiguration("affine linear part is singular")
        if self.source_frame == self.target_frame:
            raise ValueError("source and target frame must differ")
        object.__setattr__(self, "matrix", m)

    @property
    def linear(self) -> np.ndarray:
        return self.matrix[:, :2]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:, 2]

    def __call__(self, p) -> np.ndarray:
        return apply_affine(self, p)

    def inverse(self) -> "AffineTransform":
        inv = np.linalg.inv(self.linear)
        m = np.hstack([inv, -(inv @ self.translation)[:, None]])
        return AffineTransform(m, self.target_frame, self.source_frame)

    @classmethod
    def identity(cls, source_frame=0, target_frame=1):
        return cls(np.hstack([np.eye(2), np.zeros((2, 1))]), source_frame, target_frame)


def fit_affine(src, dst, source_frame: int = 0, target_frame: int = 1) -> AffineTransform:
    """Least-squares affine transform mapping ``src`` onto ``dst`` (>= 3 points)."""
    src = as_points(src)
    dst = as_points(dst)
    if src.shape != dst.shape:
        raise ValueError(f"src {src.shape} and dst {dst.shape} differ in shape")
    if src.shape[0] < 3:
        raise DegenerateConfiguration(f"affine fit needs >= 3 points, got {src.shape[0]}")
    # condition by centring so the rank test is translation independent
    mu = src.mean(axis=0)
    s = np.sqrt(np.mean(np.sum((src - mu) ** 2, axis=1)))
    if s == 0.0:
        raise DegenerateConfiguration("coincident source points")
    An = np.hstack([(src - mu) / s, np.ones((src.shape[0], 1))])
    try:
        P, _ = solve_least_squares(An, dst)
    except DegenerateSystem as exc:
        raise DegenerateConfiguration(f"collinear source points ({exc})") from None
    lin = P[:2].T / s
    t = P[2] - lin @ mu
    return AffineTransform(np.hstack([lin, t[:, None]]), source_frame, target_frame)


def apply_affine(t: AffineTransform, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    out = as_points(p) @ t.linear.T + t.translation
    return out[0] if single else out


def affine_residuals(t: AffineTransform, src, dst) -> np.ndarray:
    """Per-point transfer error ``||t(src_i) - dst_i||``."""
    return np.linalg.norm(apply_affine(t, as_points(src)) - as_points(dst), axis=1)


def forward_backward_error(t_ab: AffineTransform, src, dst, t_ba: AffineTransform, symmetric: bool = False) -> float:
    """Mean round-trip error of mapping an atom's points forward then back.

    ``t_ab`` maps frame l to r (this atom), ``t_ba`` maps r back to l (the
    other atom). The forward direction starts from ``src``; with
    ``symmetric`` the reverse round trip starting from ``dst`` is also
    measured and the larger mean is returned.
    """
    src = as_points(src)
    fwd = float(np.mean(np.linalg.norm(apply_affine(t_ba, apply_affine(t_ab, src)) - src, axis=1)))
    if not symmetric:
        return fwd
    dst = as_points(dst)
    bwd = float(
        np.mean(np.linalg.norm(apply_affine(t_ab, apply_affine(t_ba, dst)) - dst, axis=1))
    )
    return max(fwd, bwd)


# -------------------------------------------------------------------- fundamental


@dataclass(frozen=True)
class FundamentalMatrix:
    """Rank-2 fundamental matrix with unit Frobenius norm; ``y_r^T F y_l = 0``."""

    matrix: np.ndarray
    frame_pair: tuple = (0, 1)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise ValueError("fundamental matrix must be a finite 3x3 array")
        object.__setattr__(self, "matrix", m)

    def epipolar_lines(self, pts_l) -> np.ndarray:
        """Lines ``F y_l`` in the right image, one row ``(a, b, c)`` per point."""
        return homogenise(pts_l) @ self.matrix.T


def hartley_normalisation(p):
    """Similarity moving the centroid to the origin with RMS distance sqrt(2)."""
    p = as_points(p)
    mu = p.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((p - mu) ** 2, axis=1)))
    if rms == 0.0:
        raise DegenerateConfiguration("all points coincide")
    s = np.sqrt(2.0) / rms
    return np.array([[s, 0.0, -s * mu[0]], [0.0, s, -s * mu[1]], [0.0, 0.0, 1.0]])


def estimate_fundamental(pts_l, pts_r, frame_pair=(0, 1), rank_tol: float = 1e-10) -> FundamentalMatrix:
    """Normalised 8-point estimate of F with rank-2 enforcement.

    Raises :class:`DegenerateConfiguration` when fewer than 8 correspondences
    are given or the design matrix has rank below 8 (e.g. every point on one
    plane, which leaves a family of valid F).
    """
    pts_l = as_points(pts_l)
    pts_r = as_points(pts_r)
    if pts_l.shape != pts_r.shape:
        raise ValueError(f"point sets differ in shape: {pts_l.shape} vs {pts_r.shape}")
    n = pts_l.shape[0]
    if n < 8:
        raise DegenerateConfiguration(f"8-point estimation needs >= 8 correspondences, got {n}")
    Tl = hartley_normalisation(pts_l)
    Tr = hartley_normalisation(pts_r)
    a = homogenise(pts_l) @ Tl.T
    b = homogenise(pts_r) @ Tr.T
    # row i: kron(b_i, a_i) so that vec(F) . row = b^T F a
    D = (b[:, :, None] * a[:, None, :]).reshape(n, 9)
    _, s, vt = np.linalg.svd(D, full_matrices=True)
    if n < 9:
        s = np.concatenate([s, np.zeros(9 - len(s))])
    if s[7] <= rank_tol * s[0]:
        raise DegenerateConfiguration("design matrix rank < 8")
    Fn = vt[-1].reshape(3, 3)
    u, sv, wt = np.linalg.svd(Fn)
    Fn = u @ np.diag([sv[0], sv[1], 0.0]) @ wt
    F = Tr.T @ Fn @ Tl
    # the rank is preserved by the (invertible) denormalisation; re-truncate
    # to remove round-off in the third singular value
    u, sv, wt = np.linalg.svd(F)
    F = u @ np.diag([sv[0], sv[1], 0.0]) @ wt
    F = F / np.linalg.norm(F)
    return FundamentalMatrix(F, tuple(frame_pair))


def _fmat(F) -> np.ndarray:
    return F.matrix if isinstance(F, FundamentalMatrix) else np.asarray(F, dtype=float)


def sampson_distances(F, y1, y2, eps: float = 0.0) -> np.ndarray:
    """Vectorised first-order Sampson distance for correspondences ``y1 <-> y2``.

    Entries whose denominator is ``<= eps`` come back as ``nan``.
    """
    M = _fmat(F)
    h1 = homogenise(y1)
    h2 = homogenise(y2)
    Fy1 = h1 @ M.T
    Fty2 = h2 @ M
    num = np.sum(h2 * Fy1, axis=1) ** 2
    den = Fy1[:, 0] ** 2 + Fy1[:, 1] ** 2 + Fty2[:, 0] ** 2 + Fty2[:, 1] ** 2
    out = np.full(num.shape, np.nan)
    ok = den > eps
    out[ok] = num[ok] / den[ok]
    return out


def sampson_distance(F, y1, y2) -> float:
    """Sampson distance of one correspondence; raises ZeroDenominator at an epipole."""
    d = sampson_distances(F, np.asarray(y1, dtype=float)[:2], np.asarray(y2, dtype=float)[:2])[0]
    if np.isnan(d):
        raise ZeroDenominator("both epipolar-line gradients vanish")
    return float(d)


def epipolar_residuals(F, y1, y2) -> np.ndarray:
    """Algebraic residuals ``y2^T F y1``."""
    M = _fmat(F)
    return np.sum(homogenise(y2) * (homogenise(y1) @ M.T), axis=1)
