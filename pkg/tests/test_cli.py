import json

import pytest
from fastapi.testclient import TestClient

from sandshape import dataset, learner
from sandshape.cli import main
from sandshape.scenarios import c_shape, save_scenario, scenario_to_dict
from sandshape.server import create_app
from sandshape.session import load_log


@pytest.fixture()
def small_scenario_file(tmp_path):
    sc = c_shape(5)
    sc.termination.max_iterations = 6
    path = tmp_path / "small.json"
    save_scenario(sc, path)
    return path


def test_run_and_replay(tmp_path, small_scenario_file, capsys):
    log_path = tmp_path / "log.jsonl"
    rc = main(["run", "--scenario", str(small_scenario_file), "--mode", "operator",
               "--strategy", "max", "--out", str(log_path)])
    assert rc == 0
    assert "e_initial" in capsys.readouterr().out
    assert log_path.exists()
    rc = main(["replay", "--log", str(log_path)])
    assert rc == 0
    assert capsys.readouterr().out.strip().splitlines()[-1] == "match"


def test_run_scripted_choices(tmp_path, small_scenario_file):
    log_path = tmp_path / "log.jsonl"
    rc = main(["run", "--scenario", str(small_scenario_file), "--mode", "operator",
               "--choices", "push-max,push-avg", "--out", str(log_path)])
    assert rc == 0
    log = load_log(log_path)
    assert [r.choice for r in log.records] == ["push-max", "push-avg"]
    assert log.reason == "operator"


def test_bench_csv(tmp_path, small_scenario_file):
    out = tmp_path / "curves.csv"
    rc = main(["bench", "--scenarios", str(small_scenario_file),
               "--strategies", "max", "--seeds", "1,2", "--csv", str(out)])
    assert rc == 0
    rows = out.read_text().strip().splitlines()
    assert rows[0] == "scenario,strategy,seed,k,e_k"
    assert len(rows) > 3


def test_dataset_and_train_pipeline(tmp_path, capsys):
    demo_dir = tmp_path / "demos"
    rc = main(["dataset", "synth", "--out", str(demo_dir), "--count", "2",
               "--seed", "3", "--width", "160", "--height", "120"])
    assert rc == 0
    assert len(list(demo_dir.iterdir())) == 2

    triplets_path = tmp_path / "triplets.jsonl"
    stats_path = tmp_path / "stats.json"
    rc = main(["dataset", "extract", "--demos", str(demo_dir),
               "--out", str(triplets_path), "--tau-u", "5", "--tau-x", "3",
               "--stats-out", str(stats_path)])
    assert rc == 0
    triplets = dataset.load_triplets(triplets_path)
    assert len(triplets) >= 10
    stats = json.loads(stats_path.read_text())
    assert set(stats) == {"mu_d", "sigma_d", "mu_dv", "sigma_dv"}

    model_path = tmp_path / "model.json"
    rc = main(["train", "--data", str(triplets_path), "--episodes", "50",
               "--seed", "0", "--model", str(model_path),
               "--report", str(tmp_path / "report.json")])
    assert rc == 0
    model = learner.load(model_path)
    assert model.layer_dims == [40, 100, 100, 100, 4]
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["episodes"] == 50


def test_scenario_list_and_dump(tmp_path, capsys):
    assert main(["scenario", "list"]) == 0
    names = capsys.readouterr().out.split()
    assert "c-shape" in names and "tap-two-piles" in names
    out = tmp_path / "c.json"
    assert main(["scenario", "dump", "c-shape", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["name"] == "c-shape"


def test_cli_and_http_equal_logs(tmp_path, small_scenario_file):
    """The same choice script through the CLI and the HTTP API yields the
    same records (wall time excluded by construction)."""
    choices = ["push-max", "push-avg", "push-max"]
    log_path = tmp_path / "cli.jsonl"
    main(["run", "--scenario", str(small_scenario_file), "--mode", "operator",
          "--choices", ",".join(choices), "--out", str(log_path)])
    cli_log = load_log(log_path)

    client = TestClient(create_app())
    sc = c_shape(5)
    sc.termination.max_iterations = 6
    sid = client.post("/sessions", json={"scenario": scenario_to_dict(sc)}).json()["id"]
    for choice in choices:
        out = client.post(f"/sessions/{sid}/step", json={"choice": choice}).json()
        if out["terminated"]:
            break
    client.post(f"/sessions/{sid}/terminate", json={"reason": "operator"})
    history = client.get(f"/sessions/{sid}/history").json()

    assert [r.to_doc() for r in cli_log.records] == history["records"]
    assert history["reason"] == cli_log.reason
