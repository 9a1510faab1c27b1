"""
engine.py

The calibration loop: draw a mini-batch from the candidate pool, simulate and
label every candidate against the reference series, grow the ground-truth
database, retrain the surrogate and rebuild the pool when it is confident,
and stop on the KS threshold (after the minimum budget) or on the maximum
budget.
"""
import enum
import json
import logging
import multiprocessing
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

import abmcalib
from abmcalib.abm import EpidemicSeries, simulate, validate_params
from abmcalib.config import CalibrationConfig
from abmcalib.database import GroundTruthDb, LabeledSample, best_candidate, persist_db
from abmcalib.errors import CalibrationError, SingleClass, TooFewRows
from abmcalib.ks import Label, evaluate_candidate, to_cdf
from abmcalib.sampling import (
    CandidatePool,
    SamplerKind,
    draw_minibatch,
    generate_pool_random,
    generate_pool_sobol,
    reinitialize_pool_epsilon_greedy,
    unique_rows,
)
from abmcalib.sobol import SobolGenerator, new_sobol
from abmcalib.surrogate import SurrogateModel, train_surrogate
from abmcalib.validation import MIN_ROWS, ValidationReport, f1_score, is_confident
from abmcalib.validation import split_train_validation

logger = logging.getLogger(__name__)

# seed streams beside the (batch_index, slot) simulation seeds
POOL_STREAM = 1 << 32
DRAW_STREAM = POOL_STREAM + 1
SPLIT_STREAM = POOL_STREAM + 2
REFERENCE_BATCH = 0


class TerminatedBy(enum.Enum):
    KS_THRESHOLD_MET = "KsThresholdMet"
    MAX_BUDGET_EXHAUSTED = "MaxBudgetExhausted"


def derive_seed(master_seed: int, batch_index: int, slot: int) -> int:
    """
        64-bit seed of one simulation, a pure function of its coordinates
    """
    state = np.random.SeedSequence([master_seed, batch_index, slot]).generate_state(
        1, dtype=np.uint64
    )
    return int(state[0])


def reference_seed(master_seed: int) -> int:
    return derive_seed(master_seed, REFERENCE_BATCH, 0)


@dataclass
class CalibrationResult:
    best_vector: Tuple[float, ...]
    best_statistic: float
    evaluations_used: int
    batches_used: int
    best_statistic_trace: List[float]
    terminated_by: TerminatedBy
    db: GroundTruthDb = field(default=None, repr=False, compare=False)
    surrogate: Optional[SurrogateModel] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "best_vector": [float(v) for v in self.best_vector],
            "best_statistic": float(self.best_statistic),
            "evaluations_used": self.evaluations_used,
            "batches_used": self.batches_used,
            "best_statistic_trace": [float(v) for v in self.best_statistic_trace],
            "terminated_by": self.terminated_by.value,
        }


def _evaluate_one(job) -> Tuple[float, str]:
    vector, reference, sim, alpha, seed = job
    try:
        series = simulate(validate_params(vector), sim, seed)
        outcome = evaluate_candidate(reference, series, alpha)
    except CalibrationError as exc:
        logger.warning("candidate %s failed, labelled Negative: %s", vector, exc)
        return 1.0, Label.NEGATIVE.value
    return outcome.statistic, outcome.label.value


def evaluate_minibatch(
    batch: Sequence[Sequence[float]],
    reference: EpidemicSeries,
    cfg: CalibrationConfig,
    batch_index: int,
    executor=None,
) -> List[LabeledSample]:
    """
        Simulates and labels every vector of a batch. Slot i of batch b runs
        with derive_seed(master_seed, b, i), or with the reference seed under
        common random numbers, so serial and parallel evaluation agree.

    :param batch: candidate vectors
    :param reference: reference series with positive mass
    :param cfg: CalibrationConfig
    :param batch_index: 1-based batch number
    :param executor: optional process pool (anything with an ordered map)
    :return: one LabeledSample per vector, in batch order
    """
    if len(batch) == 0:
        raise ValueError("cannot evaluate an empty batch")
    to_cdf(reference)

    if cfg.common_random_numbers:
        seeds = [reference_seed(cfg.master_seed)] * len(batch)
    else:
        seeds = [derive_seed(cfg.master_seed, batch_index, slot) for slot in range(len(batch))]
    vectors = [tuple(float(v) for v in vector) for vector in batch]
    jobs = [(v, reference, cfg.sim, cfg.alpha, s) for v, s in zip(vectors, seeds)]

    mapper = executor.map if executor is not None else map
    outcomes = list(mapper(_evaluate_one, jobs))
    return [
        LabeledSample(v, statistic, Label(label), batch_index, s)
        for v, s, (statistic, label) in zip(vectors, seeds, outcomes)
    ]


class _PoolSource:
    """Builds candidate pools for one run, seeded by generation number."""

    def __init__(self, cfg: CalibrationConfig) -> None:
        self.cfg = cfg
        self.base = cfg.sampler_kind.base
        self.gen: Optional[SobolGenerator] = None
        if self.base is SamplerKind.SOBOL:
            self.gen = new_sobol(cfg.n_params)
        self.generation = 0

    def _next_seed(self) -> int:
        self.generation += 1
        return derive_seed(self.cfg.master_seed, POOL_STREAM, self.generation)

    def fresh(self) -> CandidatePool:
        seed = self._next_seed()
        if self.base is SamplerKind.RANDOM:
            return generate_pool_random(self.cfg.pool_size, self.cfg.ranges, seed)
        return generate_pool_sobol(self.cfg.pool_size, self.cfg.ranges, self.gen)

    def greedy(self, model: SurrogateModel) -> CandidatePool:
        return reinitialize_pool_epsilon_greedy(
            model,
            self.base,
            self.cfg.pool_size,
            self.cfg.epsilon_positive,
            self.cfg.ranges,
            self._next_seed(),
            gen=self.gen,
            oversample=self.cfg.pool_oversample,
        )


def _without_evaluated(pool: CandidatePool, db: GroundTruthDb) -> CandidatePool:
    vectors = unique_rows(pool.vectors)
    keep = np.array([tuple(v) not in db for v in vectors], dtype=bool)
    if len(keep) and not keep.all():
        logger.debug("dropped %d already evaluated candidates", int((~keep).sum()))
    return CandidatePool(vectors[keep] if len(keep) else vectors, pool.origin)


def retrain(
    db: GroundTruthDb, cfg: CalibrationConfig, batch_index: int
) -> Tuple[Optional[SurrogateModel], Optional[ValidationReport]]:
    """
        Trains the configured surrogate on a train/validation split of the
        database and scores it on the held out rows. Returns (None, None)
        while the database is too small or holds a single class.
    """
    rows = db.training_set()
    if len(rows) < MIN_ROWS or not rows.has_both_classes():
        return None, None
    try:
        train, val = split_train_validation(
            rows, cfg.train_ratio, derive_seed(cfg.master_seed, SPLIT_STREAM, batch_index)
        )
        model = train_surrogate(
            cfg.surrogate_kind,
            train,
            cfg.surrogate_hyper,
            bounds=cfg.ranges.bounds,
            class_weighting=cfg.class_weighting,
        )
    except (SingleClass, TooFewRows) as exc:
        logger.debug("surrogate not retrained: %s", exc)
        return None, None
    report = f1_score(model.predict_many(val.features), val.positive, len(train))
    return model, report


def run_calibration(
    cfg: CalibrationConfig,
    reference: EpidemicSeries,
    initial_pool: Optional[CandidatePool] = None,
    progress: bool = False,
) -> CalibrationResult:
    """
        Runs the calibration loop until the KS threshold is met (checked
        only once abm_min_budget vectors are evaluated) or abm_max_budget
        vectors are evaluated.

    :param cfg: CalibrationConfig, validated here
    :param reference: reference series
    :param initial_pool: replaces the first generated pool when given
    :param progress: show a tqdm progress bar over evaluations
    :return: CalibrationResult carrying the ground-truth database
    """
    cfg.validate()
    to_cdf(reference)

    source = _PoolSource(cfg)
    db = GroundTruthDb()
    pool = initial_pool if initial_pool is not None else source.fresh()
    pool = _without_evaluated(pool, db)
    model: Optional[SurrogateModel] = None
    confident = False
    trace: List[float] = []
    best = np.inf
    batch_index = 0
    terminated_by = TerminatedBy.MAX_BUDGET_EXHAUSTED

    executor = multiprocessing.Pool(cfg.threads) if cfg.threads > 1 else None
    bar = tqdm(total=cfg.abm_max_budget, desc="evaluations", disable=not progress)
    try:
        while True:
            batch_index += 1
            if len(pool) < cfg.batch_size:
                logger.warning(
                    "pool holds %d candidates, fewer than a batch; refilling", len(pool)
                )
                pool = source.greedy(model) if confident else source.fresh()
                pool = _without_evaluated(pool, db)

            batch = draw_minibatch(
                pool, cfg.batch_size, derive_seed(cfg.master_seed, DRAW_STREAM, batch_index)
            )
            samples = evaluate_minibatch(batch, reference, cfg, batch_index, executor)
            db.extend(samples)
            bar.update(len(samples))

            best = min(best, min(s.statistic for s in samples))
            trace.append(float(best))
            logger.info(
                "batch %d: %d evaluations, best statistic %.6f, %d positive in batch",
                batch_index,
                len(db),
                best,
                sum(1 for s in samples if s.label is Label.POSITIVE),
            )

            if len(db) >= cfg.abm_min_budget and best <= cfg.ks_threshold:
                terminated_by = TerminatedBy.KS_THRESHOLD_MET
                break
            if len(db) >= cfg.abm_max_budget:
                break

            if cfg.sampler_kind.assisted:
                candidate, report = retrain(db, cfg, batch_index)
                if candidate is not None:
                    model = candidate
                    confident = is_confident(
                        report, len(db), cfg.batch_size, cfg.n_params, cfg.f1_threshold
                    )
                    logger.info(
                        "surrogate %s retrained: F1 %.3f on %d rows, confident=%s",
                        cfg.surrogate_kind.value,
                        report.f1,
                        report.n_val,
                        confident,
                    )
                    if confident:
                        pool = _without_evaluated(source.greedy(model), db)
    finally:
        bar.close()
        if executor is not None:
            executor.close()
            executor.join()

    best_vector, best_statistic = best_candidate(db)
    return CalibrationResult(
        best_vector=best_vector,
        best_statistic=best_statistic,
        evaluations_used=len(db),
        batches_used=batch_index,
        best_statistic_trace=trace,
        terminated_by=terminated_by,
        db=db,
        surrogate=model,
    )


def write_run_artifacts(
    result: CalibrationResult, cfg: CalibrationConfig, out_dir
) -> List[str]:
    """
        Writes result.json, db.jsonl, trace.csv and manifest.json into out_dir
    :return: written paths
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        name: os.path.join(out_dir, name)
        for name in ("result.json", "db.jsonl", "trace.csv", "manifest.json")
    }

    with open(paths["result.json"], "w") as f:
        json.dump(result.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    if result.db is not None:
        persist_db(result.db, paths["db.jsonl"])
    else:
        del paths["db.jsonl"]

    trace = pd.DataFrame(
        {
            "batch": np.arange(1, len(result.best_statistic_trace) + 1),
            "evaluations": cfg.batch_size
            * np.arange(1, len(result.best_statistic_trace) + 1),
            "best_statistic": result.best_statistic_trace,
        }
    )
    trace.to_csv(paths["trace.csv"], index=False)

    manifest = {"version": abmcalib.__version__, "config": cfg.to_dict()}
    with open(paths["manifest.json"], "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")

    logger.info("wrote run artifacts to %s", out_dir)
    return list(paths.values())
