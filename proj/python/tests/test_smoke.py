import math

import numpy as np
import pytest

import hsr


def test_ball_maps():
    x = np.array([0.3, 0.0])
    y = np.array([0.4, 0.0])
    assert hsr.mobius_add(x, np.zeros(2))[0] == pytest.approx(0.3)
    assert hsr.mobius_add(x, y)[0] == pytest.approx(0.7 / 1.12)
    assert hsr.dist(np.zeros(1), np.array([0.5])) == pytest.approx(2 * math.atanh(0.5))
    assert hsr.dist(x, x) == 0.0
    v = np.array([0.2, -0.1, 0.05])
    np.testing.assert_allclose(hsr.log0(hsr.exp0(v)), v, atol=1e-12)
    assert np.linalg.norm(hsr.project(np.array([2.0, 0.0]))) < 1.0
    np.testing.assert_allclose(hsr.mobius_scalar(1.0, x), x, atol=1e-12)
    np.testing.assert_allclose(hsr.mobius_matvec(np.eye(2), x), x, atol=1e-12)


def test_metrics():
    assert hsr.auc([0.9, 0.8, 0.3, 0.1], [1, 0, 1, 0]) == pytest.approx(0.75)
    assert hsr.accuracy([0.9, 0.2], [1, 1]) == pytest.approx(0.5)
    with pytest.raises(hsr.UsageError):
        hsr.auc([0.1], [1, 0])


def test_config():
    cfg = hsr.Config(d=8, eta=5e-3)
    assert cfg["dim"] == "8"
    cfg["epochs"] = 3
    assert cfg["epochs"] == "3"
    assert "learning_rate" in hsr.Config.keys()
    with pytest.raises(hsr.UsageError):
        cfg["nope"] = 1


def test_checks_pass():
    results = hsr.run_checks("ball")
    assert results and all(r["passed"] for r in results)


def test_train_evaluate_roundtrip(tmp_path):
    data = hsr.Dataset.synthetic(users=80, items=120, seed=5)
    assert data.num_users > 0 and sum(data.split_sizes) == len(data.records("train")) + len(
        data.records("val")
    ) + len(data.records("test"))
    data.save(str(tmp_path / "data"))
    loaded = hsr.Dataset.load(str(tmp_path / "data"))
    assert loaded.split_sizes == data.split_sizes

    cfg = hsr.Config(d=8, batch_size=128, eta=5e-3, epochs=5, seed=9)
    result = hsr.train(loaded, cfg)
    assert len(result.log) == 6
    assert not result.aborted
    model = result.model
    assert model.user_embeddings.shape == (8, loaded.num_users)
    s = model.score(0, 0)
    assert 0.0 < s < 1.0
    assert model.score_items(0, [0, 1])[0] == pytest.approx(s)

    report = model.evaluate(negatives=50, ks=[5, 10])
    assert 0.0 <= report["auc"] <= 1.0
    assert set(report["recall"]) == {5, 10}
    assert len(model.hierarchy(4)) == 4

    path = str(tmp_path / "model.bin")
    model.save(path)
    again = hsr.Model.load(path, loaded)
    assert again.score(0, 0) == pytest.approx(s, abs=1e-15)
    with pytest.raises(hsr.InputError):
        hsr.Model.load(str(tmp_path / "missing.bin"), loaded)
