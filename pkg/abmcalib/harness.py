"""
harness.py

Sanity checks and experiment suites: calibrate against a series simulated
from a known parameter vector and score how close the calibration came.

Metrics
-------
    standardized L2 - euclidean distance between predicted and true vectors,
                      each coordinate divided by the width of its range
    KS statistic    - best statistic found by the calibration
    BMS             - number of mini-batches until the running best statistic
                      reaches a success level p, i.e. KS <= (100 - p) / 100
"""
import logging
import math
import os
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from abmcalib.abm import N_PARAMS, TRUE_PARAMETERS, simulate, validate_params
from abmcalib.config import CalibrationConfig
from abmcalib.engine import CalibrationResult, derive_seed, reference_seed, run_calibration
from abmcalib.errors import ArityMismatch, CalibrationError, ConfigInvalid
from abmcalib.sampling import CandidatePool, ParameterRanges, SamplerKind
from abmcalib.sobol import scale_point
from abmcalib.surrogate import SurrogateKind

logger = logging.getLogger(__name__)

SUCCESS_LEVELS = (97.0, 97.5, 98.0, 98.5)

METHODS = (
    (SamplerKind.RANDOM, SurrogateKind.NONE),
    (SamplerKind.SOBOL, SurrogateKind.NONE),
    (SamplerKind.SURROGATE_RANDOM, SurrogateKind.DECISION_TREE),
    (SamplerKind.SURROGATE_SOBOL, SurrogateKind.DECISION_TREE),
    (SamplerKind.SURROGATE_RANDOM, SurrogateKind.GRADIENT_BOOSTED),
    (SamplerKind.SURROGATE_SOBOL, SurrogateKind.GRADIENT_BOOSTED),
    (SamplerKind.SURROGATE_RANDOM, SurrogateKind.LINEAR_SVM),
    (SamplerKind.SURROGATE_SOBOL, SurrogateKind.LINEAR_SVM),
)

# redraws of a true vector whose reference series has no infections
MAX_REFERENCE_DRAWS = 100


def method_label(sampler_kind: SamplerKind, surrogate_kind: SurrogateKind) -> str:
    if surrogate_kind is SurrogateKind.NONE:
        return sampler_kind.value
    return "%s %s" % (surrogate_kind.value, sampler_kind.base.value)


def standardized_l2(
    pred: Sequence[float], truth: Sequence[float], ranges: ParameterRanges
) -> float:
    if len(pred) != len(truth):
        raise ArityMismatch("%d predicted vs %d true values" % (len(pred), len(truth)))
    if len(pred) != len(ranges.bounds):
        raise ArityMismatch(
            "%d values for %d ranges" % (len(pred), len(ranges.bounds))
        )
    diff = (np.asarray(pred, dtype=np.float64) - np.asarray(truth, dtype=np.float64))
    return float(np.sqrt(np.sum((diff / ranges.widths) ** 2)))


def bms(trace: Sequence[float], success_level_percent: float) -> Optional[int]:
    """
        1-based index of the first batch whose running best statistic is at
        most (100 - level) / 100, None when the trace never gets there
    """
    if not 0.0 < success_level_percent < 100.0:
        raise ValueError("success level must lie in (0, 100)")
    threshold = (100.0 - success_level_percent) / 100.0
    for i, value in enumerate(trace, start=1):
        if value <= threshold:
            return i
    return None


@dataclass
class SanityReport:
    theta_star: Tuple[float, ...]
    best_vector: Tuple[float, ...]
    best_statistic: float
    l2: float
    bms: Dict[float, Optional[int]]
    result: CalibrationResult = field(repr=False)
    config: CalibrationConfig = field(repr=False)

    @property
    def terminated_by(self):
        return self.result.terminated_by

    def to_dict(self) -> dict:
        return {
            "theta_star": list(self.theta_star),
            "best_vector": list(self.best_vector),
            "best_statistic": self.best_statistic,
            "l2": self.l2,
            "bms": {str(k): v for k, v in self.bms.items()},
            "terminated_by": self.result.terminated_by.value,
            "evaluations_used": self.result.evaluations_used,
            "batches_used": self.result.batches_used,
            "common_random_numbers": self.config.common_random_numbers,
        }


def sanity_check(
    theta_star: Sequence[float],
    cfg: CalibrationConfig,
    success_levels: Sequence[float] = SUCCESS_LEVELS,
    initial_pool: Optional[CandidatePool] = None,
    progress: bool = False,
    independent_seeds: bool = False,
) -> SanityReport:
    """
        Simulates the reference from theta_star with the reference seed of
        cfg.master_seed, calibrates against it and scores the outcome.

        Every candidate is simulated with the reference seed as well, so
        theta_star itself scores exactly 0. With independent_seeds cfg picks
        the candidate seeds, and under per-slot seeds even theta_star scores
        the seed-to-seed spread of the model.
    """
    if not independent_seeds:
        cfg = replace(cfg, common_random_numbers=True)
    params = validate_params(theta_star)
    reference = simulate(params, cfg.sim, reference_seed(cfg.master_seed))
    result = run_calibration(cfg, reference, initial_pool=initial_pool, progress=progress)

    theta = tuple(params.as_vector())
    report = SanityReport(
        theta_star=theta,
        best_vector=result.best_vector,
        best_statistic=result.best_statistic,
        l2=standardized_l2(result.best_vector, theta, cfg.ranges),
        bms={level: bms(result.best_statistic_trace, level) for level in success_levels},
        result=result,
        config=cfg,
    )
    logger.info(
        "sanity check: best statistic %.6f, L2 %.4f, %s after %d evaluations",
        report.best_statistic,
        report.l2,
        result.terminated_by.value,
        result.evaluations_used,
    )
    return report


@dataclass
class ExperimentSpec:
    """
    ``params_to_calibrate`` lists parameter counts n; a cell with count n
    calibrates parameters 1..n and pins the rest to ``true_vector``.
    """

    params_to_calibrate: List[int] = field(default_factory=lambda: list(range(1, N_PARAMS + 1)))
    true_vector: Tuple[float, ...] = TRUE_PARAMETERS
    repetitions: int = 10
    method_matrix: List[Tuple[SamplerKind, SurrogateKind]] = field(
        default_factory=lambda: list(METHODS)
    )
    success_levels: List[float] = field(default_factory=lambda: list(SUCCESS_LEVELS))

    def validate(self) -> None:
        if not self.params_to_calibrate:
            raise ConfigInvalid("params_to_calibrate is empty")
        if len(set(self.params_to_calibrate)) != len(self.params_to_calibrate):
            raise ConfigInvalid("params_to_calibrate has repeated counts")
        for n in self.params_to_calibrate:
            if not 1 <= n <= N_PARAMS:
                raise ConfigInvalid("parameter count %d outside 1..%d" % (n, N_PARAMS))
        try:
            validate_params(self.true_vector)
        except CalibrationError as exc:
            raise ConfigInvalid("true_vector: %s" % exc)
        if self.repetitions < 1:
            raise ConfigInvalid("repetitions must be >= 1")
        if not self.method_matrix:
            raise ConfigInvalid("method_matrix is empty")
        for sampler_kind, surrogate_kind in self.method_matrix:
            if sampler_kind.assisted == (surrogate_kind is SurrogateKind.NONE):
                raise ConfigInvalid(
                    "sampler %s does not go with surrogate %s"
                    % (sampler_kind.value, surrogate_kind.value)
                )
        for level in self.success_levels:
            if not 0.0 < level < 100.0:
                raise ConfigInvalid("success level %r outside (0, 100)" % level)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigInvalid("unknown experiment keys: %s" % sorted(unknown))
        values = dict(data)
        try:
            if "true_vector" in values:
                values["true_vector"] = tuple(float(v) for v in values["true_vector"])
            if "method_matrix" in values:
                values["method_matrix"] = [
                    (SamplerKind(s), SurrogateKind(m)) for s, m in values["method_matrix"]
                ]
            if "params_to_calibrate" in values:
                values["params_to_calibrate"] = [int(n) for n in values["params_to_calibrate"]]
            if "success_levels" in values:
                values["success_levels"] = [float(p) for p in values["success_levels"]]
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid("malformed experiment spec: %s" % exc)
        spec = cls(**values)
        spec.validate()
        return spec

    def to_dict(self) -> dict:
        return {
            "params_to_calibrate": list(self.params_to_calibrate),
            "true_vector": list(self.true_vector),
            "repetitions": self.repetitions,
            "method_matrix": [[s.value, m.value] for s, m in self.method_matrix],
            "success_levels": list(self.success_levels),
        }


@dataclass
class ExperimentReport:
    cells: pd.DataFrame
    table2: pd.DataFrame
    table3: pd.DataFrame


def draw_true_vector(
    ranges: ParameterRanges, n_params: int, repetition: int, master_seed: int
) -> Tuple[float, ...]:
    """
        Redraws the calibrated components uniformly in their ranges; the
        pinned components keep their true_vector values
    """
    rng = np.random.default_rng([master_seed, n_params, repetition])
    free = scale_point(rng.random(len(ranges.free_indices)), ranges.free_bounds)
    return tuple(float(v) for v in ranges.embed(free)[0])


def _cell_ranges(base: ParameterRanges, spec: ExperimentSpec, n_params: int) -> ParameterRanges:
    return ParameterRanges.calibrating(n_params, spec.true_vector, base.bounds)


def _repetition_inputs(spec, cfg_base, n_params, repetition):
    """True vector and run seed of one repetition, shared by every method."""
    ranges = _cell_ranges(cfg_base.ranges, spec, n_params)
    seed = derive_seed(cfg_base.master_seed, n_params, repetition)
    for attempt in range(MAX_REFERENCE_DRAWS):
        theta = draw_true_vector(
            ranges, n_params, repetition + attempt * spec.repetitions, cfg_base.master_seed
        )
        reference = simulate(validate_params(theta), cfg_base.sim, reference_seed(seed))
        if reference.total() > 0:
            return ranges, theta, seed
        logger.debug("true vector %s gives no infections, redrawing", theta)
    raise ConfigInvalid(
        "no true vector with a non-empty reference in %d draws" % MAX_REFERENCE_DRAWS
    )


def _bms_column(level: float) -> str:
    return "bms_%s" % ("%g" % level)


def _tables(cells: pd.DataFrame, spec: ExperimentSpec):
    order = {method_label(*m): i for i, m in enumerate(spec.method_matrix)}
    means = (
        cells.groupby(["method", "n_params"], sort=False)[["l2", "ks"]].mean().reset_index()
    )
    table2 = means.pivot(index="method", columns="n_params", values=["l2", "ks"])
    table2.columns = ["%s_%d" % (metric, n) for metric, n in table2.columns]
    table2 = table2.sort_index(key=lambda idx: idx.map(order)).reset_index()

    # BMS is reported for the largest calibrated count, averaged over the
    # repetitions that reached the level
    largest = max(spec.params_to_calibrate)
    columns = [_bms_column(level) for level in spec.success_levels]
    table3 = (
        cells[cells["n_params"] == largest]
        .groupby("method", sort=False)[columns]
        .mean()
        .sort_index(key=lambda idx: idx.map(order))
        .reset_index()
    )
    return table2, table3


def run_experiment_suite(
    spec: ExperimentSpec, cfg_base: CalibrationConfig, out_dir=None, progress: bool = False
) -> ExperimentReport:
    """
        Runs every (method, parameter count) cell spec.repetitions times.
        Repetition r of count n uses the same true vector and run seed for
        every method. With out_dir, cells.csv is rewritten after each
        completed cell and table2.csv / table3.csv are written at the end.

    :param spec: ExperimentSpec
    :param cfg_base: settings shared by every run (budgets, sim, seeds)
    :param out_dir: output directory, or None to write nothing
    :param progress: show a tqdm progress bar over cells
    :return: ExperimentReport
    """
    spec.validate()
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)

    rows = []
    n_cells = len(spec.method_matrix) * len(spec.params_to_calibrate)
    bar = tqdm(total=n_cells, desc="cells", disable=not progress)
    for n_params in spec.params_to_calibrate:
        inputs = [
            _repetition_inputs(spec, cfg_base, n_params, rep) for rep in range(spec.repetitions)
        ]
        for sampler_kind, surrogate_kind in spec.method_matrix:
            label = method_label(sampler_kind, surrogate_kind)
            for rep, (ranges, theta, seed) in enumerate(inputs):
                cfg = replace(
                    cfg_base,
                    sampler_kind=sampler_kind,
                    surrogate_kind=surrogate_kind,
                    ranges=ranges,
                    master_seed=seed,
                )
                report = sanity_check(theta, cfg, spec.success_levels)
                row = {
                    "method": label,
                    "n_params": n_params,
                    "repetition": rep,
                    "l2": report.l2,
                    "ks": report.best_statistic,
                    "evaluations_used": report.result.evaluations_used,
                    "batches_used": report.result.batches_used,
                    "terminated_by": report.result.terminated_by.value,
                }
                for level in spec.success_levels:
                    value = report.bms[level]
                    row[_bms_column(level)] = math.nan if value is None else value
                rows.append(row)

            if out_dir is not None:
                pd.DataFrame(rows).to_csv(os.path.join(out_dir, "cells.csv"), index=False)
            bar.update(1)
            logger.info("cell (%s, %d) done", label, n_params)
    bar.close()

    cells = pd.DataFrame(rows)
    table2, table3 = _tables(cells, spec)
    if out_dir is not None:
        table2.to_csv(os.path.join(out_dir, "table2.csv"), index=False)
        table3.to_csv(os.path.join(out_dir, "table3.csv"), index=False)
        logger.info("wrote suite tables to %s", out_dir)
    return ExperimentReport(cells, table2, table3)
