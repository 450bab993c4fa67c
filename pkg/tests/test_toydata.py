import numpy as np

from fluxlab.toydata import (classify_mode, detour_trajectory, modes_covered,
                             straight_trajectory, two_mode_dataset,
                             unimodal_dataset)


def test_straight_trajectory_geometry():
    t = straight_trajectory(0.0)
    assert t.shape == (8, 2)
    assert np.allclose(t[:, 1], 0.0)
    assert t[-1, 0] > t[0, 0] > 0.0


def test_detour_symmetry():
    left = detour_trajectory(1)
    right = detour_trajectory(-1)
    assert np.allclose(left[:, 0], right[:, 0])
    assert np.allclose(left[:, 1], -right[:, 1])


def test_classify_modes():
    assert classify_mode(detour_trajectory(1)) == 1
    assert classify_mode(detour_trajectory(-1)) == -1
    assert classify_mode(np.zeros((8, 2))) == 0
    # half-amplitude path is right at the decision boundary; 0.6x is inside
    assert classify_mode(detour_trajectory(1, amplitude=0.21)) == 1


def test_modes_covered_thresholds():
    trajs = [detour_trajectory(1), detour_trajectory(1),
             detour_trajectory(-1), detour_trajectory(-1)]
    assert modes_covered(trajs)
    assert not modes_covered(trajs[:3])  # only one right-detour


def test_two_mode_dataset_balanced():
    obs, tau = two_mode_dataset(400, np.random.default_rng(0))
    assert np.allclose(obs, obs[0])  # identical observations: true ambiguity
    labels = [classify_mode(t) for t in tau]
    assert 150 < labels.count(1) < 250
    assert labels.count(0) == 0


def test_unimodal_dataset_deterministic_per_obs():
    obs, tau = unimodal_dataset(100, np.random.default_rng(1))
    # same obs direction -> same label (functional relationship)
    angles = np.arctan2(obs[:, 1], obs[:, 0])
    ends = tau[:, -1, :]
    want = np.stack([0.9 * np.cos(angles), 0.9 * np.sin(angles)], axis=1)
    assert np.allclose(ends, want, atol=1e-12)
