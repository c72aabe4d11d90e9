import json

import numpy as np
import pytest

from surface_dpp.experiments import (
    ConfigError,
    ExperimentConfig,
    report_files,
    rows_to_csv,
    run_experiment,
)
from surface_dpp.presets import EXPERIMENT_DESCRIPTIONS, list_presets, make_phi


def test_preset_registry():
    text = list_presets()
    assert "cos-theta" in text
    for name in EXPERIMENT_DESCRIPTIONS:
        assert name in text
    assert len(EXPERIMENT_DESCRIPTIONS) == 8
    # alphabetical listing is stable
    assert text == list_presets()
    lines = [l.strip().split()[0] for l in text.splitlines()[1:9]]
    assert lines == sorted(lines)


def test_make_phi_errors():
    with pytest.raises(ValueError):
        make_phi("harmonic:oops")
    with pytest.raises(ValueError):
        make_phi("nope")
    phi = make_phi("harmonic:3,5")
    assert phi.bandlimit() == 3


def test_unknown_experiment():
    with pytest.raises(ConfigError):
        run_experiment(ExperimentConfig("nonsense"))


def test_config_accessors():
    cfg = ExperimentConfig("szego-table", {"n_values": "4,8", "x": "1.5"})
    assert cfg.get_int_list("n_values", []) == [4, 8]
    assert cfg.get_float("x", 0.0) == 1.5
    assert cfg.get_str("missing", "d") == "d"
    with pytest.raises(ConfigError):
        cfg.get_int("x", 0)
    with pytest.raises(ConfigError):
        ExperimentConfig("a", {"ns": "1,b"}).get_int_list("ns", [])


def test_csv_format():
    rows = [{"k": 1, "value": 1.0 / 3.0, "flag": True}, {"k": 2, "value": 2.0, "flag": False}]
    text = rows_to_csv("demo", "table", rows)
    lines = text.strip().split("\n")
    assert lines[0].startswith("# schema=surface-dpp-csv/1")
    assert lines[1] == "k,value,flag"
    assert lines[2] == "k,value,flag".replace("k,value,flag", "1,0.33333333333333331,true")
    assert rows_to_csv("demo", "empty", []).startswith("# schema=")


def test_szego_experiment_report_and_reproducibility():
    cfg = ExperimentConfig("szego-table", {"n_values": "4,8"}, seed=5)
    rep1 = run_experiment(cfg)
    rep2 = run_experiment(cfg)
    assert rep1.passed
    f1, f2 = report_files(rep1), report_files(rep2)
    assert f1.keys() == f2.keys()
    for name in f1:
        assert f1[name] == f2[name]          # byte-identical CSV
    d = rep1.as_dict()
    json.dumps(d)                            # report is JSON-serializable
    assert d["version"] == rep1.version
    assert d["config"]["n_values"] == "4,8"


def test_variance_experiment_small():
    rep = run_experiment(ExperimentConfig("variance-table", {"n_values": "2,4,8"}))
    ratios = [row["ratio"] for row in rep.rows["variance"]]
    assert np.all(np.diff(ratios) > 0)
    for row, N in zip(rep.rows["variance"], [2, 4, 8]):
        assert row["ratio"] == pytest.approx(N / (N + 1), abs=1e-9)


def test_mobius_experiment_rows():
    rep = run_experiment(ExperimentConfig("mobius-identities", {"samples": "100"}, seed=1))
    assert rep.passed
    assert {row["R"] for row in rep.rows["residuals"]} == {-2.0, -0.5, 2.0}


def test_bergman_decay_variant_selection():
    rep = run_experiment(ExperimentConfig(
        "bergman-decay",
        {"variant": "local", "local_k": "20,30,40,50,60"},
    ))
    assert rep.passed
    assert set(rep.rows) == {"local-decay", "local-fit"}
    assert rep.rows["local-fit"][0]["ratio"] == pytest.approx(1.0, abs=0.15)


def test_tail_check_small():
    rep = run_experiment(ExperimentConfig(
        "tail-check",
        {"n_values": "4,8", "replicas": "300", "t_points": "9"},
        seed=9,
    ))
    assert rep.passed
    assert rep.rows["chernoff"][0]["margin"] <= 1e-8
