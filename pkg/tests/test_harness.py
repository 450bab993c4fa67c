import numpy as np
import pytest

from fluxlab.episodes import Task, gen_episodes
from fluxlab.harness import (evaluate, latency_table, write_metrics_csv,
                             write_metrics_json, write_rows_csv)
from fluxlab.policy import ModelHandle
from fluxlab.scenes import gen_scene


@pytest.fixture(scope="module")
def setup():
    scenes = [gen_scene(70 + i, name=f"h-{i}") for i in range(2)]
    specs = gen_episodes(scenes, Task.POINTNAV, 4, seed=2)
    model = ModelHandle("rf", seed=3)
    return scenes, specs, model


def test_worker_pool_matches_serial(setup):
    scenes, specs, model = setup
    serial = evaluate(model, scenes, specs, M=2, K=2, workers=1)
    pooled = evaluate(model, scenes, specs, M=2, K=2, workers=2)
    assert len(serial.rows) == len(pooled.rows)
    for a, b in zip(serial.rows, pooled.rows):
        assert a == b


def test_csv_roundtrip_and_aggregate_row(setup, tmp_path):
    scenes, specs, model = setup
    report = evaluate(model, scenes, specs, M=2, K=2)
    path = tmp_path / "m.csv"
    write_metrics_csv(report, path, {"version": "t", "config_hash": "h", "seed": 1})
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# fluxlab t config=h seed=1")
    assert len(lines) == 1 + 1 + len(specs) + 1  # comment, header, rows, aggregate
    assert lines[-1].startswith("aggregate")


def test_json_summary(setup, tmp_path):
    import json
    scenes, specs, model = setup
    report = evaluate(model, scenes, specs, M=2, K=2)
    path = tmp_path / "m.json"
    write_metrics_json(report, path, {"seed": 1})
    data = json.loads(path.read_text())
    assert data["meta"]["seed"] == 1
    assert len(data["episodes"]) == len(specs)
    assert 0.0 <= data["aggregate"]["sr"] <= 1.0


def test_latency_nfe_exact(setup):
    _, _, model = setup
    obs = np.random.default_rng(0).uniform(0.1, 1.0, model.obs_dim)
    rows = latency_table(model, obs, Ks=[1, 6, 10], M=8, repeats=3)
    for row in rows:
        assert row["nfe_per_candidate"] == row["K"]
        assert row["nfe_per_inference"] == row["K"] * 8


def test_rows_csv_formatting(tmp_path):
    rows = [{"a": 1, "b": 0.5}, {"a": 2, "b": 0.25}]
    path = tmp_path / "r.csv"
    write_rows_csv(rows, path, {"seed": 0}, fields=["a", "b"])
    text = path.read_text()
    assert "a,b\n1,0.5\n2,0.25\n" in text
