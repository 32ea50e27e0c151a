import math

import numpy as np
import pytest

from laav.data import ATOM, RV, UNLABELED, Labeling, TrajectorySet
from laav.dataio import SceneSpec, misclassification_error, synth_scene
from laav.rv import RvParams, VoteHistogram, finetune, vote_round


@pytest.fixture(scope="module")
def scene():
    return synth_scene(SceneSpec(2, (90, 90), 20, ("translation", "rotation+translation"), seed=11))


def partial(truth, keep):
    labels = np.where(keep, truth, UNLABELED)
    return Labeling(labels, keep.astype(float), np.where(keep, ATOM, RV).astype(object))


def test_params_validation():
    with pytest.raises(ValueError):
        RvParams(m=7)
    with pytest.raises(ValueError):
        RvParams(alpha=0.0)
    with pytest.raises(ValueError):
        RvParams(locked_weight=0.5)


# ------------------------------------------------------------ vote rounds


def _exact_pair():
    # three features on one rigid translation: F = [t]_x explains them exactly
    pts = np.array([[[0.0, 0], [1, 2]], [[5, 1], [6, 3]], [[2, 7], [3, 9]]])
    traj = TrajectorySet(pts)
    t = np.array([1.0, 2.0, 0.0])
    F = np.array([[0, -t[2], t[1]], [t[2], 0, -t[0]], [-t[1], t[0], 0]])
    return traj, F


def test_vote_round_zero_distance_adds_one():
    traj, F = _exact_pair()
    h = vote_round(VoteHistogram.zeros(3, 1), [F], traj, (0, 1), RvParams(alpha=1.0))
    np.testing.assert_allclose(h.scores[:, 0], 1.0)


def test_vote_round_far_features_add_nothing():
    traj, F = _exact_pair()
    pts = np.array(traj.points)
    pts[:, 1] += [[1e4, -1e4]]
    h = vote_round(VoteHistogram.zeros(3, 1), [F], TrajectorySet(pts), (0, 1), RvParams(alpha=1.0))
    assert np.all(h.scores < 1e-12)


def test_vote_round_linearity_and_decay():
    traj, F = _exact_pair()
    p1 = RvParams(alpha=1.0)
    once = vote_round(VoteHistogram.zeros(3, 2), [F, None], traj, (0, 1), p1)
    twice = vote_round(once, [F, None], traj, (0, 1), p1)
    np.testing.assert_allclose(twice.scores, 2 * once.scores)
    assert np.all(twice.scores[:, 1] == 0)
    p = RvParams(alpha=0.5)
    decayed = vote_round(VoteHistogram(np.full((3, 2), 4.0)), [None, None], traj, (0, 1), p)
    np.testing.assert_allclose(decayed.scores, 2.0)


# --------------------------------------------------------------- finetune


def test_fully_labeled_input_is_kept(scene):
    init = partial(scene.ground_truth, np.ones(scene.feature_count, bool))
    res = finetune(scene, init, 2, RvParams(seed=1))
    assert res.converged and res.iterations_used <= 10
    np.testing.assert_array_equal(res.labeling.labels, scene.ground_truth)
    assert set(res.labeling.source) == {ATOM}


def test_withheld_features_recovered(scene):
    rng = np.random.default_rng(2)
    keep = rng.random(scene.feature_count) >= 0.10
    res = finetune(scene, partial(scene.ground_truth, keep), 2, RvParams(seed=3))
    assert res.converged
    held_out = ~keep
    acc = np.mean(res.labeling.labels[held_out] == scene.ground_truth[held_out])
    assert acc >= 0.99
    assert np.all(res.labeling.source[held_out] == RV)


def test_wrong_initial_labels_corrected(scene):
    # 5 % of the features are unlocked and start from random labels, about
    # half of them on the wrong motion
    rng = np.random.default_rng(4)
    K = scene.feature_count
    wrong = rng.choice(K, size=K // 20, replace=False)
    keep = np.ones(K, bool)
    keep[wrong] = False
    res = finetune(scene, partial(scene.ground_truth, keep), 2, RvParams(seed=5))
    assert res.converged and res.iterations_used <= 150
    assert misclassification_error(res.labeling, scene.ground_truth) == 0.0


def test_wrong_locked_labels_flip(scene):
    K = scene.feature_count
    lab = scene.ground_truth.copy()
    flipped = np.arange(0, K, 25)
    lab[flipped] = 1 - lab[flipped]
    init = Labeling(lab, np.ones(K), np.full(K, ATOM, dtype=object))
    res = finetune(scene, init, 2, RvParams(seed=6))
    np.testing.assert_array_equal(res.labeling.labels, scene.ground_truth)
    assert np.all(res.labeling.source[flipped] == RV)


def test_infinite_locked_weight_never_flips(scene):
    K = scene.feature_count
    lab = scene.ground_truth.copy()
    flipped = np.arange(0, K, 25)
    lab[flipped] = 1 - lab[flipped]
    init = Labeling(lab, np.ones(K), np.full(K, ATOM, dtype=object))
    res = finetune(scene, init, 2, RvParams(seed=6, locked_weight=math.inf, max_trials=1, max_iterations=30))
    np.testing.assert_array_equal(res.labeling.labels, lab)


def test_random_mode_deterministic(scene):
    p = RvParams(seed=7)
    a = finetune(scene, Labeling.unlabeled(scene.feature_count), 2, p, init="random")
    b = finetune(scene, Labeling.unlabeled(scene.feature_count), 2, p, init="random")
    assert a.labeling == b.labeling and a.iterations_used == b.iterations_used
    assert a.converged and misclassification_error(a.labeling, scene.ground_truth) <= 0.01


def test_single_motion_and_bad_input(scene):
    res = finetune(scene, Labeling.unlabeled(scene.feature_count), 1, RvParams())
    assert res.converged and np.all(res.labeling.labels == 0)
    with pytest.raises(ValueError):
        finetune(scene, Labeling.unlabeled(scene.feature_count), 2, RvParams(), init="magic")
    with pytest.raises(ValueError):
        finetune(scene, partial(scene.ground_truth + 1, np.ones(scene.feature_count, bool)), 2, RvParams())


def test_group_collapse_counts_as_failed_trials():
    # 12 features cannot keep two groups of >= 8 members alive
    full = synth_scene(SceneSpec(2, (10, 10), 10, ("translation", "translation"), seed=1))
    traj = TrajectorySet(full.points[:12])
    res = finetune(traj, Labeling.unlabeled(12), 2, RvParams(max_trials=3, max_iterations=20), init="random")
    assert not res.converged
    assert res.iterations_used == 60 and res.trials == 3
