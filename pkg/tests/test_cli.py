import json
import os

import pytest

from sgsdistill.cli import run

SMALL_CFG = {
    "toy": {"train_per_cell": 10, "test_per_cell": 5, "class_count": 3},
    "distill": {"ipc": 4, "iterations": 8},
    "eval": {"runs": 1, "epochs": 40, "lr": 0.05},
}


@pytest.fixture()
def cfg_path(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(SMALL_CFG))
    return str(path)


def test_gen_data_outputs(tmp_path, cfg_path):
    out = tmp_path / "data"
    assert run(["gen-data", "--config", cfg_path, "--out", str(out), "--seed", "3"]) == 0
    assert (out / "toy.dgdd").exists()
    assert (out / "toy.meta.json").exists()
    assert (out / "resolved_config.json").exists()
    meta = json.loads((out / "toy.meta.json").read_text())
    assert meta["samples"] == 3 * 4 * 15


def test_distill_zero_lambdas_matches_dm_reference(tmp_path, cfg_path):
    a = tmp_path / "lam0"
    assert run(["distill", "--config", cfg_path, "--out", str(a), "--seed", "3",
                "--lambda-c", "0", "--lambda-d", "0"]) == 0
    dm_cfg = dict(SMALL_CFG)
    dm_cfg["distill"] = {**SMALL_CFG["distill"], "algorithm": "dm"}
    dm_path = tmp_path / "dm.json"
    dm_path.write_text(json.dumps(dm_cfg))
    b = tmp_path / "dmref"
    assert run(["distill", "--config", str(dm_path), "--out", str(b), "--seed", "3"]) == 0
    assert (a / "distilled.dgck").read_bytes() == (b / "distilled.dgck").read_bytes()


def test_resolved_config_round_trip(tmp_path, cfg_path):
    first = tmp_path / "first"
    assert run(["distill", "--config", cfg_path, "--out", str(first), "--seed", "9",
                "--lambda-c", "0.5", "--iters", "6"]) == 0
    second = tmp_path / "second"
    assert run(["distill", "--config", str(first / "resolved_config.json"),
                "--out", str(second)]) == 0
    for name in ["distilled.dgck", "loss_history.csv", "resolved_config.json"]:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_distill_dump_rmaps(tmp_path, cfg_path):
    out = tmp_path / "dump"
    assert run(["distill", "--config", cfg_path, "--out", str(out), "--seed", "3",
                "--dump-rmaps"]) == 0
    from sgsdistill.storage import load_grids
    rmaps = load_grids(out / "resultant_maps.dggr")
    assert rmaps.shape == (12, 3, 16, 16)
    assert rmaps.min() >= 0.0 and rmaps.max() < 1.0
    assert (out / "class_signals.dggr").exists()


def test_eval_mdg_outputs(tmp_path, cfg_path):
    out = tmp_path / "ev"
    assert run(["eval", "--config", cfg_path, "--out", str(out), "--protocol", "mdg",
                "--seed", "3"]) == 0
    lines = (out / "mdg_ood.csv").read_text().splitlines()
    assert lines[0] == "target,seed,accuracy"
    assert len(lines) == 1 + 4 * SMALL_CFG["eval"]["runs"]
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary) >= {"config_hash", "ood", "in_distribution"}
    assert (out / "mdg_id.csv").exists()


def test_eval_missing_dataset_is_io_error(tmp_path, cfg_path):
    out = tmp_path / "ev"
    code = run(["eval", "--config", cfg_path, "--out", str(out), "--protocol", "mdg",
                "--data", str(tmp_path / "missing.dgdd")])
    assert code == 3


def test_unknown_config_keys_rejected(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"mystery": 1}))
    assert run(["gen-data", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    bad.write_text(json.dumps({"distill": {"warp": 9}}))
    assert run(["gen-data", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1


def test_usage_errors(tmp_path):
    assert run(["distill"]) == 1                       # missing --out
    assert run(["eval", "--out", str(tmp_path)]) == 1  # missing --protocol


def test_oracle_outputs(tmp_path):
    out = tmp_path / "oracle"
    assert run(["oracle", "--out", str(out), "--s-list", "4,16,64",
                "--trials", "60", "--seed", "1"]) == 0
    lines = (out / "decay_curve.csv").read_text().splitlines()
    assert lines[0] == "S,mean_class_magnitude,stderr"
    assert len(lines) == 4
    sweep_lines = (out / "resultant_sweep.csv").read_text().splitlines()
    assert sweep_lines[0] == "a,estimate,stderr"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["class_slope"] == pytest.approx(-1.0, abs=0.4)


def test_cluster_outputs(tmp_path, cfg_path):
    out = tmp_path / "cl"
    assert run(["cluster", "--config", cfg_path, "--out", str(out), "--k", "4",
                "--seed", "3"]) == 0
    lines = (out / "assignments.csv").read_text().splitlines()
    assert lines[0] == "sample_index,pseudo_domain"
    assert len(lines) == 1 + 180
    summary = json.loads((out / "summary.json").read_text())
    assert summary["purity_vs_domains"] >= 0.8


def test_sweep_outputs_and_grid_limit(tmp_path, cfg_path):
    out = tmp_path / "sw"
    assert run(["sweep", "--config", cfg_path, "--out", str(out), "--param", "lambda-c",
                "--values", "0,1", "--seed", "3"]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "param,value,mean_ood_accuracy,std"
    assert len(lines) == 3
    too_many = ",".join(str(v) for v in range(65))
    assert run(["sweep", "--config", cfg_path, "--out", str(tmp_path / "sw2"),
                "--param", "lambda-c", "--values", too_many]) == 1
    assert run(["sweep", "--config", cfg_path, "--out", str(tmp_path / "sw3"),
                "--param", "eta", "--values", "1"]) == 1


def test_sweep_zero_cell_equals_dm_baseline(tmp_path):
    # With lambda_d pinned to 0, the lambda_c = 0 sweep cell is exactly the
    # plain-matching baseline; shared seed streams make the means identical.
    cfg = dict(SMALL_CFG)
    cfg["distill"] = {**SMALL_CFG["distill"], "lambda_d": 0.0}
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    sweep_out = tmp_path / "sw"
    assert run(["sweep", "--config", str(cfg_path), "--out", str(sweep_out),
                "--param", "lambda-c", "--values", "0,1", "--seed", "3"]) == 0
    rows = (sweep_out / "sweep.csv").read_text().splitlines()[1:]
    zero_row_mean = float(rows[0].split(",")[2])
    eval_out = tmp_path / "ev"
    assert run(["eval", "--config", str(cfg_path), "--out", str(eval_out),
                "--protocol", "mdg", "--seed", "3", "--lambda-c", "0"]) == 0
    baseline = json.loads((eval_out / "summary.json").read_text())["ood"]["mean"]
    assert zero_row_mean == pytest.approx(baseline, abs=5e-7)  # CSV keeps 6 digits


def test_sweep_over_pseudo_domain_counts(tmp_path):
    # Enough samples per cell that every (pseudo-domain, class) pair stays
    # populated after clustering the tinted source.
    cfg = {
        "toy": {
            "train_per_cell": 24, "test_per_cell": 5, "class_count": 3,
            "styles": [
                {"kind": "tinted", "variants": 4, "tint_strength": 1.5},
                {"kind": "invert"}, {"kind": "lowfreq"}, {"kind": "checker"},
            ],
        },
        "distill": {"ipc": 4, "iterations": 6},
        "eval": {"runs": 1, "epochs": 40, "lr": 0.05},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "swk"
    assert run(["sweep", "--config", str(cfg_path), "--out", str(out),
                "--param", "k", "--values", "2,3,4", "--seed", "3"]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert len(lines) == 4
    assert all(line.startswith("k,") for line in lines[1:])


def test_outputs_confined_to_out_dir(tmp_path, cfg_path):
    # The input dataset file is read, never rewritten.
    data_dir = tmp_path / "data"
    run(["gen-data", "--config", cfg_path, "--out", str(data_dir), "--seed", "3"])
    before = (data_dir / "toy.dgdd").read_bytes()
    out = tmp_path / "dist"
    assert run(["distill", "--config", cfg_path, "--out", str(out),
                "--data", str(data_dir / "toy.dgdd"), "--seed", "4"]) == 0
    assert (data_dir / "toy.dgdd").read_bytes() == before
