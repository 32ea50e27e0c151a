"""Trajectory files, synthetic scenes, noise injection and the error metric."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .data import UNLABELED, Labeling, TrajectorySet
from .errors import DimensionMismatch, ParseError

TRAJ_MAGIC = "LAAV-TRAJ 1"
LABELS_MAGIC = "LAAV-LABELS 1"

MOTION_KINDS = ("translation", "rotation+translation", "affine-drift")


# ------------------------------------------------------------------ file format


def _fmt(x: float) -> str:
    # repr is the shortest string that round-trips a float exactly
    return repr(float(x))


def save_trajectories(traj: TrajectorySet, path) -> None:
    K, L = traj.feature_count, traj.frame_count
    lines = [TRAJ_MAGIC, f"{K} {L} {traj.num_motions}"]
    for k in range(K):
        row = " ".join(_fmt(v) for v in traj.points[k].reshape(-1))
        if traj.ground_truth is not None:
            row += f" | {int(traj.ground_truth[k])}"
        lines.append(row)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_trajectories(path) -> TrajectorySet:
    """Parse a trajectory interchange file (see README for the format)."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().split("\n")
    rows = [(i + 1, line) for i, line in enumerate(raw) if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise ParseError("empty file", line=1)
    lineno, magic = rows[0]
    if magic.strip() != TRAJ_MAGIC:
        raise ParseError(f"expected header {TRAJ_MAGIC!r}, got {magic.strip()!r}", line=lineno)
    if len(rows) < 2:
        raise ParseError("missing 'K L C' line", line=lineno + 1)
    lineno, dims = rows[1]
    parts = dims.split()
    if len(parts) != 3:
        raise ParseError(f"expected 'K L C', got {dims.strip()!r}", line=lineno)
    try:
        K, L, C = (int(p) for p in parts)
    except ValueError:
        raise ParseError(f"non-integer in 'K L C' line: {dims.strip()!r}", line=lineno) from None
    if K < 1 or L < 2 or C < 0:
        raise ParseError(f"invalid dimensions K={K} L={L} C={C}", line=lineno)
    body = rows[2:]
    if len(body) != K:
        last = body[-1][0] if body else lineno
        raise ParseError(f"expected {K} feature rows, found {len(body)}", line=last)

    points = np.empty((K, L, 2))
    labels = []
    for k, (lineno, line) in enumerate(body):
        coords, sep, tail = line.partition("|")
        values = coords.split()
        if len(values) != 2 * L:
            raise DimensionMismatch(
                f"feature row {k} has {len(values)} coordinates, expected {2 * L}", line=lineno
            )
        try:
            points[k] = np.array([float(v) for v in values]).reshape(L, 2)
        except ValueError:
            col = next(j for j, v in enumerate(values) if not _is_float(v)) + 1
            raise ParseError(f"feature row {k}: bad number", line=lineno, column=col) from None
        if sep:
            try:
                labels.append(int(tail.strip()))
            except ValueError:
                raise ParseError(f"feature row {k}: bad label {tail.strip()!r}", line=lineno) from None
        else:
            labels.append(None)
    if not np.all(np.isfinite(points)):
        raise ParseError("non-finite coordinate")

    present = [g is not None for g in labels]
    if any(present) and not all(present):
        first = present.index(False) if present[0] else present.index(True)
        raise ParseError("ground-truth labels must be given for all rows or none", line=body[first][0])
    gt = np.array(labels, dtype=int) if all(present) else None
    if gt is not None and (gt.min() < 0 or (C and gt.max() >= C)):
        raise ParseError(f"ground-truth labels outside [0, {C})")
    return TrajectorySet(points, num_motions=C, ground_truth=gt)


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def save_labeling(labeling: Labeling, path) -> None:
    lines = [LABELS_MAGIC]
    for k, (lab, conf, src) in enumerate(zip(labeling.labels, labeling.confidence, labeling.source)):
        lines.append(f"{k} {int(lab)} {conf:.6f} {src}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_labeling(path) -> Labeling:
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read().split("\n")
    rows = [(i + 1, line) for i, line in enumerate(raw) if line.strip() and not line.startswith("#")]
    if not rows or rows[0][1].strip() != LABELS_MAGIC:
        raise ParseError(f"expected header {LABELS_MAGIC!r}", line=1)
    labels, conf, src = [], [], []
    for expected, (lineno, line) in enumerate(rows[1:]):
        parts = line.split()
        if len(parts) != 4:
            raise ParseError("expected 'feature_id label confidence source'", line=lineno)
        try:
            fid, lab, c = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError("malformed labeling row", line=lineno) from None
        if fid != expected:
            raise ParseError(f"feature ids must be consecutive, expected {expected}", line=lineno)
        labels.append(lab)
        conf.append(c)
        src.append(parts[3])
    return Labeling(np.array(labels, dtype=int), np.array(conf), np.array(src, dtype=object))


def format_metrics(metrics: dict) -> str:
    out = []
    for key, value in metrics.items():
        if isinstance(value, bool):
            value = int(value)
        if isinstance(value, float):
            value = "nan" if math.isnan(value) else f"{value:.6f}"
        out.append(f"{key} {value}")
    return "\n".join(out) + "\n"


def save_metrics(metrics: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_metrics(metrics))


def load_metrics(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                key, value = line.split(None, 1)
                out[key] = value.strip()
    return out


# ---------------------------------------------------------------- synthetic data


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for a synthetic multi-motion scene with exact ground truth.

    Each motion is a rigid two-facet "roof" seen by an orthographic camera:
    its image motion is an in-plane field of the given kind plus an
    out-of-plane tilt of ``tilt`` rad/frame. The facets give the object
    depth, so each motion has a unique fundamental matrix, while every
    facet still moves by an exact affine map. With ``tilt=0`` the motions
    reduce to pure 2-D parametric fields.
    """

    num_motions: int = 2
    features_per_motion: tuple = (80, 80)
    frames: int = 20
    motion_kinds: tuple = ()
    field_of_view: tuple = (640.0, 480.0)
    seed: int = 0
    tilt: float = 0.02
    relief: float = 0.6
    density: float = 12.0
    velocities: tuple | None = None
    rotation_rates: tuple | None = None

    def __post_init__(self):
        if self.num_motions < 1:
            raise ValueError("num_motions must be >= 1")
        if len(self.features_per_motion) != self.num_motions:
            raise ValueError("features_per_motion needs one count per motion")
        if any(n < 10 for n in self.features_per_motion):
            raise ValueError("every motion needs >= 10 features")
        if self.frames < 5:
            raise ValueError("frames must be >= 5")
        if self.motion_kinds and len(self.motion_kinds) != self.num_motions:
            raise ValueError("motion_kinds needs one entry per motion")
        for kind in self.motion_kinds:
            if kind not in MOTION_KINDS:
                raise ValueError(f"unknown motion kind {kind!r}")
        if self.density <= 0:
            raise ValueError("density must be > 0")
        if self.velocities is not None and len(self.velocities) != self.num_motions:
            raise ValueError("velocities needs one (vx, vy) per motion")
        if self.rotation_rates is not None and len(self.rotation_rates) != self.num_motions:
            raise ValueError("rotation_rates needs one rate per motion")

    @property
    def kinds(self) -> tuple:
        if self.motion_kinds:
            return tuple(self.motion_kinds)
        return tuple(MOTION_KINDS[c % len(MOTION_KINDS)] for c in range(self.num_motions))


@dataclass(frozen=True)
class NoiseSpec:
    sigma_n: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_n < 0:
            raise ValueError("sigma_n must be >= 0")


@dataclass
class MotionParams:
    """Closed-form parameters of one synthetic motion (for tests and plots)."""

    center: np.ndarray
    velocity: np.ndarray
    rotation_rate: float
    tilt_rate: float
    tilt_axis: float
    drift: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))

    def positions(self, local3d: np.ndarray, frames: int) -> np.ndarray:
        """Image positions ``(N, frames, 2)`` of object-local 3-D points."""
        out = np.empty((local3d.shape[0], frames, 2))
        ax = np.array([math.cos(self.tilt_axis), math.sin(self.tilt_axis), 0.0])
        for l in range(frames):
            R = _rot_z(self.rotation_rate * l) @ _rot_axis(ax, self.tilt_rate * l)
            xy = (local3d @ R.T)[:, :2]
            A = np.eye(2) + l * self.drift
            out[:, l, :] = self.center + l * self.velocity + xy @ A.T
        return out


def _rot_z(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_axis(axis, a):
    # Rodrigues
    K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(a) * K + (1 - math.cos(a)) * (K @ K)


def _sample_velocities(rng, C, max_speed=3.0, min_sep=2.0):
    for _ in range(10000):
        v = rng.uniform(-max_speed, max_speed, size=(C, 2))
        ok = all(np.linalg.norm(v[i] - v[j]) >= min_sep for i in range(C) for j in range(i + 1, C))
        if ok:
            return v
    raise RuntimeError("could not sample separable velocities")


MIN_OBJECT_GAP = 50.0


def _layout(sizes, gaps, W, H):
    total = sum(w for w, _ in sizes) + float(np.sum(gaps))
    x = W / 2 - total / 2
    out = []
    for c, (w, _) in enumerate(sizes):
        out.append(np.array([x + w / 2, H / 2]))
        x += w + (gaps[c] if c < len(gaps) else 0.0)
    return out


def _closest_approach(points):
    """``(distance, a, b)`` for the closest pair of objects over all frames."""
    worst = None
    for a in range(len(points)):
        for b in range(a + 1, len(points)):
            for l in range(points[a].shape[1]):
                d = np.min(np.linalg.norm(points[a][:, l, None, :] - points[b][None, :, l, :], axis=2))
                if worst is None or d < worst[0]:
                    worst = (float(d), a, b)
    return worst


def synth_scene_detailed(spec: SceneSpec):
    """Like :func:`synth_scene` but also returns per-motion parameters and facet ids."""
    rng = np.random.default_rng(spec.seed)
    C = spec.num_motions
    kinds = spec.kinds
    W, H = spec.field_of_view
    r2_disc = math.pi * 40.0**2
    area_per_feature = r2_disc / spec.density

    sizes = []
    for n in spec.features_per_motion:
        side = math.sqrt(n * area_per_feature)
        sizes.append((side * 1.2, side / 1.2))
    if spec.velocities is not None:
        vel = np.asarray(spec.velocities, dtype=float).reshape(C, 2)
    else:
        vel = _sample_velocities(rng, C)

    locals_, truth, facets, params = [], [], [], []
    for c in range(C):
        w, h = sizes[c]
        n = spec.features_per_motion[c]
        uv = rng.uniform([-w / 2, -h / 2], [w / 2, h / 2], size=(n, 2))
        # roof: two planar facets meeting along a crease through the centre
        crease = rng.uniform(0, math.pi)
        normal = np.array([math.cos(crease), math.sin(crease)])
        side_dist = uv @ normal
        depth = spec.relief * np.abs(side_dist)
        depth -= depth.mean()
        locals_.append(np.column_stack([uv, depth]))

        kind = kinds[c]
        if spec.rotation_rates is not None:
            omega = float(spec.rotation_rates[c])
        elif kind == "rotation+translation":
            omega = rng.choice([-1, 1]) * rng.uniform(0.01, 0.03)
        else:
            omega = 0.0
        drift = np.zeros((2, 2))
        if kind == "affine-drift":
            drift = rng.uniform(-0.004, 0.004, size=(2, 2))
        params.append(
            MotionParams(
                center=np.zeros(2),
                velocity=vel[c],
                rotation_rate=omega,
                tilt_rate=spec.tilt * rng.uniform(0.75, 1.25) * rng.choice([-1, 1]),
                tilt_axis=rng.uniform(0, math.pi),
                drift=drift,
            )
        )
        truth.append(np.full(n, c))
        facets.append((side_dist >= 0).astype(int) + 2 * c)

    # lay objects out left to right, widening gaps until every pair stays
    # more than MIN_OBJECT_GAP apart in every frame
    relative = [p.positions(loc, spec.frames) for p, loc in zip(params, locals_)]
    gaps = np.full(max(C - 1, 0), MIN_OBJECT_GAP + 10.0)
    for _ in range(100):
        offsets = _layout(sizes, gaps, W, H)
        points = [rel + off for rel, off in zip(relative, offsets)]
        worst = _closest_approach(points)
        if worst is None or worst[0] > MIN_OBJECT_GAP:
            break
        _, a, b = worst
        gaps[min(a, b):max(a, b)] += (MIN_OBJECT_GAP - worst[0]) / max(abs(b - a), 1) + 5.0
    for p, off in zip(params, offsets):
        p.center = off

    order = rng.permutation(sum(spec.features_per_motion))
    pts = np.concatenate(points)[order]
    gt = np.concatenate(truth)[order]
    facet = np.concatenate(facets)[order]
    return TrajectorySet(pts, num_motions=C, ground_truth=gt), params, facet


def synth_scene(spec: SceneSpec) -> TrajectorySet:
    """Generate a noise-free trajectory set with ground truth; deterministic per seed."""
    return synth_scene_detailed(spec)[0]


def add_noise(traj: TrajectorySet, noise: NoiseSpec) -> TrajectorySet:
    """Add i.i.d. N(0, sigma_n^2) noise to every coordinate; sigma_n = 0 is the identity."""
    if noise.sigma_n == 0:
        return traj
    rng = np.random.default_rng(noise.seed)
    pts = traj.points + rng.normal(0.0, noise.sigma_n, size=traj.points.shape)
    return TrajectorySet(pts, num_motions=traj.num_motions, ground_truth=traj.ground_truth)


def standard_suite(seed: int = 0) -> list:
    """The scenes used for noise studies: two- and three-motion, mixed kinds."""
    return [
        SceneSpec(2, (90, 90), 20, ("translation", "rotation+translation"), seed=seed),
        SceneSpec(2, (120, 70), 15, ("affine-drift", "translation"), seed=seed + 1),
        SceneSpec(3, (80, 80, 80), 20, MOTION_KINDS, seed=seed + 2),
    ]


# ------------------------------------------------------------------------ metric


def misclassification_error(predicted, truth, num_motions: int | None = None) -> float:
    """Fraction of features mislabeled under the best one-to-one relabeling.

    ``predicted`` may be a :class:`Labeling` or an integer array; unlabeled
    features (-1) always count as errors.
    """
    if isinstance(predicted, Labeling):
        predicted = predicted.labels
    pred = np.asarray(predicted, dtype=int)
    true = np.asarray(truth, dtype=int)
    if pred.shape != true.shape:
        raise ValueError(f"predicted {pred.shape} and truth {true.shape} differ in shape")
    K = pred.shape[0]
    if K == 0:
        return 0.0
    n = max(num_motions or 0, int(pred.max()) + 1, int(true.max()) + 1, 1)
    conf = np.zeros((n, n), dtype=int)
    valid = pred != UNLABELED
    np.add.at(conf, (pred[valid], true[valid]), 1)
    best = 0
    for perm in itertools.permutations(range(n)):
        best = max(best, int(conf[np.arange(n), perm].sum()))
    return (K - best) / K
