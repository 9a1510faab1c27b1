import json

import numpy as np
import pandas as pd
import pytest

from abmcalib import __version__
from abmcalib.abm import EpidemicSeries
from abmcalib.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from abmcalib.sobol import new_sobol

TINY = {
    "sim": {"population_size": 40, "initial_infected": 4, "horizon_steps": 60},
    "batch_size": 5,
    "abm_min_budget": 10,
    "abm_max_budget": 10,
    "pool_size": 50,
}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY))
    return str(path)


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_sobol_dump(tmp_path):
    assert main(["sobol-dump", "--dimension", "3", "--count", "10", "--out-dir", str(tmp_path)]) == EXIT_OK
    frame = pd.read_csv(tmp_path / "sobol.csv")
    assert list(frame.columns) == ["x1", "x2", "x3"]
    np.testing.assert_allclose(frame.to_numpy(), new_sobol(3).take(10), rtol=0, atol=1e-15)


def test_sobol_dump_bad_dimension(tmp_path):
    assert main(["sobol-dump", "--dimension", "0", "--count", "4", "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_simulate(tmp_path):
    assert main(["simulate", "--profile", "desk", "--seed", "2", "--out-dir", str(tmp_path)]) == EXIT_OK
    series = EpidemicSeries.from_csv(tmp_path / "series.csv")
    assert len(series) == 2000
    assert series.total() > 0


def test_simulate_out_of_range(tmp_path):
    params = ["1.5", "0.1", "0.4", "30", "14", "0.002", "0.012"]
    code = main(["simulate", "--profile", "desk", "--params", *params, "--out-dir", str(tmp_path)])
    assert code == EXIT_CONFIG


def test_calibrate(tmp_path, tiny_config):
    out = tmp_path / "run"
    code = main(["calibrate", "--config", tiny_config, "--seed", "4", "--out-dir", str(out)])
    assert code == EXIT_OK
    result = json.loads((out / "result.json").read_text())
    assert result["evaluations_used"] == 10
    assert (out / "db.jsonl").exists()
    assert (out / "trace.csv").exists()


def test_calibrate_against_a_file(tmp_path, tiny_config):
    reference = tmp_path / "reference.csv"
    EpidemicSeries(np.r_[np.full(30, 4), np.full(30, 6)]).to_csv(reference)
    code = main(
        ["calibrate", "--config", tiny_config, "--reference", str(reference), "--out-dir", str(tmp_path)]
    )
    assert code == EXIT_OK


def test_calibrate_wrong_horizon(tmp_path, tiny_config):
    reference = tmp_path / "reference.csv"
    EpidemicSeries(np.full(20, 4)).to_csv(reference)
    code = main(
        ["calibrate", "--config", tiny_config, "--reference", str(reference), "--out-dir", str(tmp_path)]
    )
    assert code == EXIT_CONFIG


def test_calibrate_empty_reference(tmp_path, tiny_config):
    reference = tmp_path / "reference.csv"
    EpidemicSeries(np.zeros(60, dtype=int)).to_csv(reference)
    code = main(
        ["calibrate", "--config", tiny_config, "--reference", str(reference), "--out-dir", str(tmp_path)]
    )
    assert code == EXIT_RUNTIME


def test_calibrate_missing_reference(tmp_path, tiny_config):
    code = main(
        ["calibrate", "--config", tiny_config, "--reference", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path)]
    )
    assert code == EXIT_RUNTIME


@pytest.mark.parametrize(
    "text",
    [
        "infected\n" + "4\n" * 30 + "-1\n" * 30,
        "infected\n" + "4\n" * 30 + "2.5\n" * 30,
        "infected\n" + "4\n" * 59 + "many\n",
        "",
        "infected\n4\n5,6\n",
    ],
)
def test_calibrate_malformed_reference(tmp_path, tiny_config, text):
    reference = tmp_path / "reference.csv"
    reference.write_text(text)
    code = main(
        ["calibrate", "--config", tiny_config, "--reference", str(reference), "--out-dir", str(tmp_path)]
    )
    assert code == EXIT_CONFIG


@pytest.mark.parametrize(
    "doc",
    [
        {"abm_min_budget": 30, "abm_max_budget": 10},
        {"batchsize": 5},
        {"sampler_kind": "SurrogateSobol"},
        {"batch_size": "5"},
        {"sim": {"population_size": "40"}},
        {"common_random_numbers": "yes"},
    ],
)
def test_calibrate_bad_config(tmp_path, doc):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(dict(TINY, **doc)))
    assert main(["calibrate", "--config", str(path), "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as info:
        main(["fit"])
    assert info.value.code == 2


def test_sanity_check(tmp_path, tiny_config):
    code = main(
        [
            "sanity-check",
            "--config", tiny_config,
            "--n-params", "2",
            "--sampler", "SurrogateRandom",
            "--surrogate", "DecisionTree",
            "--out-dir", str(tmp_path),
        ]
    )
    assert code == EXIT_OK
    report = json.loads((tmp_path / "sanity.json").read_text())
    assert report["evaluations_used"] <= 10
    assert report["best_vector"][2:] == report["theta_star"][2:]
    assert set(report["bms"]) == {"97.0", "97.5", "98.0", "98.5"}
    assert report["common_random_numbers"] is True
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["common_random_numbers"] is True


def test_sanity_check_independent_seeds(tmp_path, tiny_config):
    code = main(
        ["sanity-check", "--config", tiny_config, "--independent-seeds", "--out-dir", str(tmp_path)]
    )
    assert code == EXIT_OK
    report = json.loads((tmp_path / "sanity.json").read_text())
    assert report["common_random_numbers"] is False


def test_sanity_check_bad_count(tmp_path, tiny_config):
    code = main(["sanity-check", "--config", tiny_config, "--n-params", "9", "--out-dir", str(tmp_path)])
    assert code == EXIT_CONFIG


def test_suite(tmp_path, tiny_config, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(
        json.dumps(
            {
                "params_to_calibrate": [1],
                "repetitions": 2,
                "method_matrix": [["Random", "None"], ["SurrogateSobol", "GradientBoosted"]],
            }
        )
    )
    out = tmp_path / "suite"
    code = main(["suite", "--config", tiny_config, "--spec", str(spec), "--out-dir", str(out)])
    assert code == EXIT_OK
    table2 = pd.read_csv(out / "table2.csv")
    assert list(table2["method"]) == ["Random", "GradientBoosted Sobol"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["spec"]["repetitions"] == 2
    assert "GradientBoosted Sobol" in capsys.readouterr().out


def test_suite_bad_spec(tmp_path, tiny_config):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"repetitions": 0}))
    assert main(["suite", "--config", tiny_config, "--spec", str(spec), "--out-dir", str(tmp_path)]) == EXIT_CONFIG
