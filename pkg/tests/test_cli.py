"""CLI subcommands: configs in, JSON out, exit codes."""

import json
import math

import numpy as np
import pytest

from l0bounds.cli import main


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def _run(argv, capsys=None):
    code = main(argv)
    return code


def test_bounds_glm_roundtrip(tmp_path, capsys):
    cfg = _write(
        tmp_path / "cfg.json",
        {
            "theorem": "glm",
            "design": {"tag": "pm1_iid", "n": 50, "p": 8, "seed": 1},
            "family": {"tag": "bernoulli"},
            "interval": [-2.0, 2.0],
            "q": 0.1,
            "nu": 0.5,
        },
    )
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path)]) == 0
    blob = json.loads((tmp_path / "bounds.json").read_text())
    assert blob["theorem"] == "glm"
    assert blob["c_r"] == pytest.approx(3 * blob["c1"] ** 2 / blob["c2"], rel=1e-12)
    assert "c_r=" in capsys.readouterr().out


def test_bounds_ub_strip(tmp_path):
    cfg = _write(
        tmp_path / "cfg.json",
        {
            "theorem": "ub_strip",
            "design": {"tag": "pm1_iid", "n": 40, "p": 6, "seed": 2},
            "link": {"tag": "logistic_flip", "p01": 0.1, "p11": 0.9},
            "interval": [-1.5, 1.5],
            "q": 0.1,
            "nu": 0.5,
            "rho1": math.pi / 2,
            "theta": 0.75,
        },
    )
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 0
    blob = json.loads((tmp_path / "bounds.json").read_text())
    assert blob["theorem"] == "ub_strip"
    assert blob["c_r"] > 0


def test_fit_from_csv(tmp_path):
    rng = np.random.default_rng(4)
    X = rng.standard_normal((30, 4))
    beta = np.array([0.0, 1.0, 0.0, -0.5])
    y = X @ beta + 0.01 * rng.standard_normal(30)
    np.savetxt(tmp_path / "x.csv", X, delimiter=",")
    np.savetxt(tmp_path / "y.csv", y, delimiter=",")
    cfg = _write(
        tmp_path / "cfg.json",
        {
            "loss": "mle",
            "family": {"tag": "gaussian"},
            "c_r": 0.05,
            "h_max": 2,
            "domain": {"interval": [-10, 10], "max_support": 2, "l1inf_cap": 10.0},
        },
    )
    assert (
        main(
            [
                "fit",
                "--config",
                cfg,
                "--x",
                str(tmp_path / "x.csv"),
                "--y",
                str(tmp_path / "y.csv"),
                "--out",
                str(tmp_path),
                "--quiet",
            ]
        )
        == 0
    )
    blob = json.loads((tmp_path / "fit.json").read_text())
    assert blob["support"] == [1, 3]
    assert len(blob["beta_hat"]) == 4


def test_fit_requires_data_paths(tmp_path):
    cfg = _write(tmp_path / "cfg.json", {"loss": "mle"})
    assert main(["fit", "--config", cfg]) == 1


def test_coverage_writes_json_and_csv(tmp_path, capsys):
    cfg = _write(
        tmp_path / "cfg.json",
        {"n": 30, "p": 5, "spt_size": 1, "replicates": 5, "seed": 11},
    )
    assert main(["coverage", "--config", cfg, "--out", str(tmp_path)]) == 0
    blob = json.loads((tmp_path / "coverage.json").read_text())
    assert blob["replicates"] == 5
    lines = (tmp_path / "coverage.csv").read_text().strip().splitlines()
    assert len(lines) == 6
    assert "coverage=" in capsys.readouterr().out


def test_coverage_seed_override_changes_result(tmp_path):
    cfg = _write(
        tmp_path / "cfg.json",
        {"n": 30, "p": 5, "spt_size": 1, "replicates": 5, "seed": 11},
    )
    main(["coverage", "--config", cfg, "--out", str(tmp_path / "a"), "--quiet"])
    main(
        [
            "coverage", "--config", cfg, "--out", str(tmp_path / "b"),
            "--seed", "99", "--quiet",
        ]
    )
    a = json.loads((tmp_path / "a" / "coverage.json").read_text())
    b = json.loads((tmp_path / "b" / "coverage.json").read_text())
    assert a["config"]["seed"] != b["config"]["seed"]


def test_grid_subcommand(tmp_path):
    cfg = _write(
        tmp_path / "cfg.json",
        {
            "design": {"tag": "pm1_iid", "n": 30, "p": 6, "seed": 3},
            "link": {"tag": "logistic_flip", "p01": 0.1, "p11": 0.9},
            "domain": {"interval": [-1.5, 1.5], "max_support": 1, "l1inf_cap": 1.5},
            "h": 2,
        },
    )
    assert main(["grid", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 0
    blob = json.loads((tmp_path / "grid.json").read_text())
    assert blob["size"] >= 1
    assert blob["size"] <= blob["cardinality_bound"]


def test_verify_tail_subcommand(tmp_path):
    cfg = _write(
        tmp_path / "cfg.json",
        {
            "what": "tail",
            "noise": {"tag": "gaussian_iid", "sigma": 1.0},
            "trials": 10000,
            "n": 10,
            "n_dirs": 2,
        },
    )
    assert main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 0
    blob = json.loads((tmp_path / "verify.json").read_text())
    assert blob["all_ok"] is True


def test_verify_control_subcommand(tmp_path):
    cfg = _write(
        tmp_path / "cfg.json",
        {
            "what": "control",
            "noise": {"tag": "gaussian_iid", "sigma": 1.0},
            "link": {"tag": "logistic_flip", "p01": 0.1, "p11": 0.9},
            "design": {"tag": "pm1_iid", "n": 12, "p": 3, "seed": 4},
            "q": 0.1,
            "trials": 5000,
        },
    )
    assert main(["verify", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 0
    blob = json.loads((tmp_path / "verify.json").read_text())
    assert blob["ok"] is True


def test_exit_code_1_on_bad_config(tmp_path):
    missing = str(tmp_path / "nope.json")
    assert main(["bounds", "--config", missing]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("not json at all")
    assert main(["bounds", "--config", str(bad)]) == 1
    unknown = _write(tmp_path / "u.json", {"theorem": "nope", "interval": [-1, 1],
                                           "q": 0.1, "nu": 0.5,
                                           "design": {"tag": "pm1_iid", "n": 5, "p": 2}})
    assert main(["bounds", "--config", str(tmp_path / "u.json")]) == 1


def test_exit_code_2_on_computation_error(tmp_path):
    # theta too close to 1 makes the one-disc series diverge -> exit 2
    cfg = _write(
        tmp_path / "cfg.json",
        {
            "theorem": "one_disc",
            "design": {"tag": "pm1_iid", "n": 30, "p": 6, "seed": 5},
            "link": {"tag": "logistic_flip", "p01": 0.1, "p11": 0.9},
            "interval": [-1.5, 1.5],
            "q": 0.1,
            "nu": 0.5,
            "theta": 0.999,
        },
    )
    assert main(["bounds", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_quiet_suppresses_summary(tmp_path, capsys):
    cfg = _write(
        tmp_path / "cfg.json",
        {"n": 30, "p": 5, "spt_size": 1, "replicates": 3, "seed": 1},
    )
    main(["coverage", "--config", cfg, "--out", str(tmp_path), "--quiet"])
    assert capsys.readouterr().out == ""
