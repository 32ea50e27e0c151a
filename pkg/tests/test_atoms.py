import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laav.atoms import (
    Atom,
    AtomConstructionConfig,
    affine_ransac,
    atom_overlap_graph_edges,
    build_atoms,
    feature_atom_membership,
    valid_frame_pairs,
)
from laav.data import TrajectorySet
from laav.dataio import SceneSpec, synth_scene
from laav.errors import NoConsensus
from laav.geometry import AffineTransform
from laav.numerics import RansacConfig


def translating(pts0, velocity, frames):
    steps = np.arange(frames)[None, :, None] * np.asarray(velocity, float)
    return pts0[:, None, :] + steps


def _atom(i, feats, centroid, L=2):
    return Atom(
        id=i,
        feature_ids=np.array(sorted(feats)),
        origin_feature=feats[0],
        frame_pair=(0, 1),
        transform=AffineTransform.identity(),
        centroid_per_frame=np.tile(np.asarray(centroid, float), (L, 1)),
    )


def test_config_validation():
    with pytest.raises(ValueError):
        AtomConstructionConfig(r1=50, r2=40)
    assert AtomConstructionConfig().separation(20) == 6
    assert AtomConstructionConfig().separation(4) == 2


def test_valid_frame_pairs():
    assert valid_frame_pairs(4, 2) == [(0, 2), (0, 3), (1, 3)]


def test_single_translation_covers_everything():
    rng = np.random.default_rng(0)
    pts0 = rng.uniform(-10, 10, (12, 2)) + 100
    traj = TrajectorySet(translating(pts0, (1.5, -0.5), 8))
    atoms, unassigned = build_atoms(traj, AtomConstructionConfig(r1=5, r2=40))
    assert atoms and unassigned == set()
    assert set(np.concatenate([a.feature_ids for a in atoms])) == set(range(12))


def test_two_features_no_atoms():
    traj = TrajectorySet(translating(np.array([[0.0, 0], [1, 1]]), (1, 0), 5))
    atoms, unassigned = build_atoms(traj, AtomConstructionConfig())
    assert atoms == [] and unassigned == {0, 1}


def test_two_clusters_far_apart_are_pure():
    rng = np.random.default_rng(1)
    a = translating(rng.uniform(0, 40, (20, 2)), (2, 0), 10)
    b = translating(rng.uniform(0, 40, (20, 2)) + [500, 0], (-1, 3), 10)
    truth = np.repeat([0, 1], 20)
    traj = TrajectorySet(np.concatenate([a, b]), 2, truth)
    atoms, _ = build_atoms(traj, AtomConstructionConfig(r1=10, r2=50, seed=3))
    assert atoms
    for atom in atoms:
        assert len(set(truth[atom.feature_ids])) == 1


def test_atom_invariants_on_synthetic_scene():
    traj = synth_scene(SceneSpec(2, (80, 80), 15, seed=4))
    cfg = AtomConstructionConfig(seed=5)
    atoms, unassigned = build_atoms(traj, cfg)
    covered = set()
    for i, atom in enumerate(atoms):
        assert atom.id == i and len(atom) >= 3
        assert atom.origin_feature in atom.feature_ids
        l, r = atom.frame_pair
        assert r - l >= cfg.separation(traj.frame_count)
        src, dst = traj.points[atom.feature_ids, l], traj.points[atom.feature_ids, r]
        assert np.all(np.linalg.norm(atom.transform(src) - dst, axis=1) <= cfg.ransac.inlier_threshold + 1e-9)
        covered |= set(atom.feature_ids.tolist())
    assert covered | unassigned == set(range(traj.feature_count))
    assert not covered & unassigned


def test_build_atoms_deterministic():
    traj = synth_scene(SceneSpec(2, (60, 60), 12, seed=6))
    a1, u1 = build_atoms(traj, AtomConstructionConfig(seed=7))
    a2, u2 = build_atoms(traj, AtomConstructionConfig(seed=7))
    assert a1 == a2 and u1 == u2


# ------------------------------------------------------------ affine RANSAC


def test_affine_ransac_outliers():
    rng = np.random.default_rng(8)
    src = rng.uniform(0, 60, (30, 2))
    dst = src @ np.array([[0.9, 0.1], [-0.2, 1.1]]).T + [4, 4]
    dst[:5] += 100
    model, mask = affine_ransac(src, dst, RansacConfig(min_inlier_ratio=0.5), rng=np.random.default_rng(0))
    assert mask.tolist() == [False] * 5 + [True] * 25
    np.testing.assert_allclose(model.linear, [[0.9, 0.1], [-0.2, 1.1]], atol=1e-9)


def test_affine_ransac_no_consensus():
    rng = np.random.default_rng(9)
    src = rng.uniform(0, 60, (10, 2))
    with pytest.raises(NoConsensus):
        affine_ransac(src, rng.uniform(0, 60, (10, 2)), RansacConfig(), rng=np.random.default_rng(0))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(3, 40))
def test_affine_ransac_exact_data_all_inliers(seed, n):
    rng = np.random.default_rng(seed)
    src = rng.uniform(-100, 100, (n, 2))
    M = np.c_[np.eye(2) + rng.normal(scale=0.2, size=(2, 2)), rng.normal(scale=10, size=2)]
    _, mask = affine_ransac(src, src @ M[:, :2].T + M[:, 2], RansacConfig(), rng=rng)
    assert mask.all()


# ------------------------------------------------------------ overlap graph


def test_overlap_edges_shared_feature():
    atoms = [_atom(0, [0, 1, 2], (0, 0)), _atom(1, [2, 3, 4], (1000, 0))]
    assert (0, 1) in atom_overlap_graph_edges(atoms, k_neighbors=0)


def test_overlap_edges_single_atom():
    assert atom_overlap_graph_edges([_atom(0, [0, 1, 2], (0, 0))]) == []


def test_overlap_edges_line_layout():
    atoms = [_atom(i, [3 * i, 3 * i + 1, 3 * i + 2], (10.0 * i, 0)) for i in range(5)]
    edges = set(atom_overlap_graph_edges(atoms, k_neighbors=2))
    for i in range(1, 4):
        assert (i - 1, i) in edges and (i, i + 1) in edges
    assert all(i < j for i, j in edges)


def test_feature_membership():
    atoms = [_atom(0, [0, 1, 2], (0, 0)), _atom(1, [2, 3, 4], (1, 0))]
    m = feature_atom_membership(atoms, 6)
    assert m[2] == [0, 1] and m[5] == [] and m[0] == [0]
