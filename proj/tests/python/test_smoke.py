import json
import subprocess

import numpy as np
import pytest

import rmps


def test_henon_trajectory_follows_the_map():
    t = rmps.henon_trajectory(0.1, -0.2, a=0.3, b=0.4, steps=50)
    assert t.shape == (51, 2)
    x, y = t[:-1, 0], t[:-1, 1]
    np.testing.assert_array_equal(t[1:, 0], 1 - 0.3 * x * x + y)
    np.testing.assert_array_equal(t[1:, 1], 0.4 * x)


def test_sam_crossings_are_ordered():
    points, times, truncated = rmps.sam_section_crossings(0.3, 0.2, mu=3.0, t_end=50.0)
    assert not truncated
    assert points.shape[1] == 2 and len(points) == len(times) > 0
    assert np.all(np.diff(times) > 0)
    with pytest.raises(ValueError):
        rmps.sam_section_crossings(10.0, 0.0, mu=3.0, t_end=1.0)


def test_rasterize_shading_law():
    pts = [np.array([[0.01, 0.01]] * 3 + [[-3.9, 3.9]])]
    counts = rmps.count_grid(pts, size=8)
    img = rmps.rasterize(pts, size=8, alpha=0.7)
    assert counts.sum() == 4
    np.testing.assert_array_equal(img, 0.7 ** counts)
    with pytest.raises(ValueError):
        rmps.rasterize([np.zeros((3, 3))])


def test_nn_loss_examples():
    assert rmps.nn_state_space_loss(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0]])) == 1.0
    assert rmps.nn_state_space_loss(np.array([[0.0, 0.0], [2.0, 0.0]]), np.array([[1.0, 0.0]])) == 1.0
    assert rmps.temporal_mse([np.array([[0.0, 0.0]])], [np.array([[3.0, 4.0]])]) == 25.0


def test_pipeline(tmp_path):
    data = tmp_path / "data"
    assert rmps.generate("henon", 40, data, seed=3, n_init=16, steps=80) == 40
    thetas = rmps.dataset_thetas(data)
    train, val, test = rmps.split(thetas, seed=1)
    assert sorted(train + val + test) == list(range(40))

    theta, traj = rmps.load_sample(data / "samples" / "000000.rmps")
    assert len(theta) == 2 and len(traj) == 16
    assert len(rmps.augment(traj, seed=4)) >= 10

    r = rmps.train(data, tmp_path / "run", image_size=16, steps=6, batch=8, val_interval=3, weight_decay=0.05,
                   stem_channels=4, stage_channels=[4, 8], blocks=1)
    assert np.isfinite(r["test_clean"]["loss"])
    m = rmps.evaluate(r["checkpoint"], split="validation")
    assert m["loss"] == pytest.approx(r["best_validation"]["loss"], rel=1e-9)

    p = rmps.Predictor(r["checkpoint"])
    assert p.system == "henon" and p.image_size == 16
    est = p.predict(traj)
    assert len(est) == 2 and est == p.predict(traj)

    fit = rmps.estimate_baseline(traj, restarts=1, budget=15)
    assert fit["evaluations"] <= 15
    assert 0.05 <= fit["theta"][0] <= 0.45 and -1.1 <= fit["theta"][1] <= 1.1
