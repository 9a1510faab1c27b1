from dataclasses import replace
from unittest import TestCase

import numpy as np
import pandas as pd
import pytest

from abmcalib.abm import TRUE_PARAMETERS, SimConfig
from abmcalib.config import CalibrationConfig
from abmcalib.engine import TerminatedBy, derive_seed, reference_seed
from abmcalib.errors import ArityMismatch, ConfigInvalid
from abmcalib.harness import (
    METHODS,
    ExperimentSpec,
    bms,
    draw_true_vector,
    method_label,
    run_experiment_suite,
    sanity_check,
    standardized_l2,
)
from abmcalib.sampling import CandidatePool, ParameterRanges, SamplerKind, generate_pool_random
from abmcalib.surrogate import SurrogateKind

RANGES = ParameterRanges()
# fast movers with a wide contact radius, so the small population mixes
THETA = (0.5, 0.1, 0.1, 2.0, 1.0, 0.05, 0.1)


def tiny_cfg(**changes):
    base = replace(
        CalibrationConfig(),
        sim=SimConfig(population_size=40, initial_infected=4, horizon_steps=60),
        batch_size=5,
        abm_min_budget=10,
        abm_max_budget=10,
        pool_size=50,
        master_seed=11,
    )
    return replace(base, **changes)


class TestStandardizedL2(TestCase):
    def test_Identical(self):
        self.assertEqual(standardized_l2(TRUE_PARAMETERS, TRUE_PARAMETERS, RANGES), 0.0)

    def test_FullWidthOnOneAxis(self):
        pred = list(TRUE_PARAMETERS)
        pred[3] -= 30.0
        truth = list(TRUE_PARAMETERS)
        truth[3] += 11.0
        self.assertAlmostEqual(standardized_l2(pred, truth, RANGES), 1.0)

    def test_TwoHalfWidths(self):
        pred = [0.25, 0.25, 0.5, 20.0, 10.0, 0.5, 0.5]
        truth = [0.75, 0.75, 0.5, 20.0, 10.0, 0.5, 0.5]
        self.assertAlmostEqual(standardized_l2(pred, truth, RANGES), 0.7071, places=4)

    def test_ArityMismatch(self):
        with self.assertRaises(ArityMismatch):
            standardized_l2([0.1, 0.2], [0.1], RANGES)
        with self.assertRaises(ArityMismatch):
            standardized_l2([0.1, 0.2], [0.1, 0.3], RANGES)


def test_l2_is_a_metric():
    rng = np.random.default_rng(6)
    lows = np.array([lo for lo, _ in RANGES.bounds])
    widths = RANGES.widths
    for _ in range(200):
        a, b, c = (lows + widths * rng.random(7) for _ in range(3))
        ab = standardized_l2(a, b, RANGES)
        assert ab == pytest.approx(standardized_l2(b, a, RANGES))
        assert ab <= standardized_l2(a, c, RANGES) + standardized_l2(c, b, RANGES) + 1e-12
        assert ab <= np.sqrt(7)


class TestBms(TestCase):
    def test_Reached(self):
        self.assertEqual(bms([0.05, 0.03, 0.01], 97), 2)

    def test_NeverReached(self):
        self.assertIsNone(bms([0.5, 0.4], 98.5))

    def test_FirstBatch(self):
        self.assertEqual(bms([0.0, 0.0], 98.5), 1)

    def test_Empty(self):
        self.assertIsNone(bms([], 97))

    def test_Level(self):
        with self.assertRaises(ValueError):
            bms([0.1], 100)
        with self.assertRaises(ValueError):
            bms([0.1], 0)


def test_bms_grows_with_level():
    trace = [0.2, 0.04, 0.028, 0.021, 0.016, 0.011, 0.011]
    found = [bms(trace, level) for level in (97, 97.5, 98, 98.5)]
    assert found == [3, 4, 5, 6]
    assert bms(trace, 99) is None


def test_method_labels():
    labels = [method_label(*m) for m in METHODS]
    assert labels[0] == "Random"
    assert labels[2] == "DecisionTree Random"
    assert labels[7] == "LinearSvm Sobol"
    assert len(set(labels)) == len(METHODS)


def planted_pool(theta, ranges, n=5):
    others = generate_pool_random(n - 1, ranges, 0).vectors
    return CandidatePool(np.vstack((theta, others)), SamplerKind.RANDOM)


def test_sanity_check_planted():
    cfg = tiny_cfg(abm_min_budget=5, abm_max_budget=10, ks_threshold=0.0)
    report = sanity_check(THETA, cfg, initial_pool=planted_pool(THETA, cfg.ranges))
    assert report.terminated_by is TerminatedBy.KS_THRESHOLD_MET
    assert report.best_statistic == 0.0
    assert report.l2 == 0.0
    assert report.bms == {97.0: 1, 97.5: 1, 98.0: 1, 98.5: 1}
    data = report.to_dict()
    assert data["terminated_by"] == "KsThresholdMet"
    assert data["bms"]["97.0"] == 1
    assert data["common_random_numbers"] is True


def test_sanity_check_simulates_with_the_reference_seed():
    cfg = tiny_cfg(ks_threshold=-1.0)
    assert not cfg.common_random_numbers
    report = sanity_check(THETA, cfg, initial_pool=planted_pool(THETA, cfg.ranges, 10))
    assert {s.seed_used for s in report.result.db} == {reference_seed(cfg.master_seed)}
    assert [s.statistic for s in report.result.db if s.vector == THETA] == [0.0]
    assert report.config.common_random_numbers


def test_sanity_check_independent_seeds():
    cfg = tiny_cfg(ks_threshold=-1.0)
    report = sanity_check(
        THETA, cfg, initial_pool=planted_pool(THETA, cfg.ranges, 10), independent_seeds=True
    )
    seeds = [s.seed_used for s in report.result.db]
    assert seeds == [derive_seed(cfg.master_seed, b, i) for b in (1, 2) for i in range(5)]
    assert not report.to_dict()["common_random_numbers"]


def test_sanity_check_scores_the_best_vector():
    cfg = tiny_cfg(ks_threshold=-1.0)
    report = sanity_check(THETA, cfg)
    assert report.result.evaluations_used == 10
    assert report.l2 == pytest.approx(standardized_l2(report.best_vector, THETA, cfg.ranges))
    assert report.best_statistic == min(report.result.db.statistics())


class TestExperimentSpec(TestCase):
    def test_Defaults(self):
        spec = ExperimentSpec()
        spec.validate()
        self.assertEqual(spec.params_to_calibrate, [1, 2, 3, 4, 5, 6, 7])
        self.assertEqual(len(spec.method_matrix), 8)

    def test_FromDict(self):
        spec = ExperimentSpec.from_dict(
            {
                "params_to_calibrate": [1, 3],
                "repetitions": 2,
                "method_matrix": [["Sobol", "None"], ["SurrogateSobol", "LinearSvm"]],
            }
        )
        self.assertEqual(spec.method_matrix[1], (SamplerKind.SURROGATE_SOBOL, SurrogateKind.LINEAR_SVM))
        self.assertEqual(ExperimentSpec.from_dict(spec.to_dict()), spec)

    def test_Rejects(self):
        for doc in (
            {"repetition": 3},
            {"params_to_calibrate": [0]},
            {"params_to_calibrate": [2, 2]},
            {"repetitions": 0},
            {"method_matrix": [["Random", "DecisionTree"]]},
            {"method_matrix": [["Grid", "None"]]},
            {"true_vector": [0.5] * 6},
            {"success_levels": [100]},
        ):
            with self.assertRaises(ConfigInvalid):
                ExperimentSpec.from_dict(doc)


def test_draw_true_vector_keeps_pinned_values():
    ranges = ParameterRanges.calibrating(2, TRUE_PARAMETERS)
    theta = draw_true_vector(ranges, 2, 0, 5)
    assert theta[2:] == TRUE_PARAMETERS[2:]
    assert theta[:2] != TRUE_PARAMETERS[:2]
    assert draw_true_vector(ranges, 2, 0, 5) == theta
    assert draw_true_vector(ranges, 2, 1, 5) != theta


def small_suite():
    return ExperimentSpec(
        params_to_calibrate=[1, 2],
        repetitions=2,
        method_matrix=[
            (SamplerKind.RANDOM, SurrogateKind.NONE),
            (SamplerKind.SOBOL, SurrogateKind.NONE),
        ],
    )


def test_small_suite(tmp_path):
    report = run_experiment_suite(small_suite(), tiny_cfg(), out_dir=tmp_path)
    cells = report.cells
    assert len(cells) == 8
    assert set(cells["method"]) == {"Random", "Sobol"}
    assert (cells.loc[cells["n_params"] == 1, "l2"] <= 1.0).all()
    assert (cells["evaluations_used"] <= 10).all()

    assert list(report.table2["method"]) == ["Random", "Sobol"]
    assert set(report.table2.columns) == {"method", "l2_1", "l2_2", "ks_1", "ks_2"}
    assert list(report.table3.columns) == ["method", "bms_97", "bms_97.5", "bms_98", "bms_98.5"]

    for name in ("cells.csv", "table2.csv", "table3.csv"):
        assert (tmp_path / name).exists()
    on_disk = pd.read_csv(tmp_path / "cells.csv")
    assert len(on_disk) == 8


def test_suite_replay(tmp_path):
    run_experiment_suite(small_suite(), tiny_cfg(), out_dir=tmp_path / "a")
    run_experiment_suite(small_suite(), tiny_cfg(), out_dir=tmp_path / "b")
    for name in ("cells.csv", "table2.csv", "table3.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
