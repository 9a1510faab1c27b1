"""Train/validation split, F1 scoring and the surrogate confidence gate."""
import logging
import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from abmcalib.errors import LengthMismatch, TooFewRows
from abmcalib.ks import Label
from abmcalib.surrogate import TrainingSet

logger = logging.getLogger(__name__)

MIN_ROWS = 5


@dataclass(frozen=True)
class ValidationReport:
    f1: float
    precision: float
    recall: float
    n_train: int
    n_val: int


def division_or_default(a: float, b: float) -> float:
    return a / b if b != 0 else 0.0


def _n_first(n: int, ratio: float) -> int:
    return min(max(int(math.floor(ratio * n + 0.5)), 1), n - 1)


def split_train_validation(
    db: TrainingSet, ratio: float, seed
) -> Tuple[TrainingSet, TrainingSet]:
    """
        Seeded shuffle then split. Stratified by label when both classes have
        at least 2 members: each class keeps at least one row on each side,
        and the train total follows the ratio by largest remainders.

    :param db: all labelled rows
    :param ratio: training share in (0, 1)
    :param seed: shuffle seed
    :return: (train, validation)
    """
    n = len(db)
    if not 0.0 < ratio < 1.0:
        raise TooFewRows("ratio must lie in (0, 1), got %r" % ratio)
    if n < MIN_ROWS:
        raise TooFewRows("need at least %d rows, got %d" % (MIN_ROWS, n))

    rng = np.random.default_rng(seed)
    n_pos = int(db.positive.sum())
    if min(n_pos, n - n_pos) < 2:
        order = rng.permutation(n)
        cut = _n_first(n, ratio)
        return db.subset(np.sort(order[:cut])), db.subset(np.sort(order[cut:]))

    classes = [np.flatnonzero(db.positive), np.flatnonzero(~db.positive)]
    target = _n_first(n, ratio)
    exact = [ratio * len(c) for c in classes]
    quota = [int(math.floor(e)) for e in exact]
    # largest remainders first, ties to the positive class
    for i in sorted(range(2), key=lambda i: exact[i] - quota[i], reverse=True):
        if sum(quota) < target:
            quota[i] += 1
    quota = [min(max(q, 1), len(c) - 1) for q, c in zip(quota, classes)]

    train_idx, val_idx = [], []
    for members, q in zip(classes, quota):
        shuffled = rng.permutation(members)
        train_idx.extend(shuffled[:q])
        val_idx.extend(shuffled[q:])
    return db.subset(np.sort(train_idx)), db.subset(np.sort(val_idx))


def f1_score(
    predictions: Sequence[Label], truth: Sequence[Label], n_train: int = 0
) -> ValidationReport:
    """
        F1 of the Positive class; 0 when precision + recall is 0
    """
    if len(predictions) != len(truth):
        raise LengthMismatch(
            "%d predictions for %d labels" % (len(predictions), len(truth))
        )
    if len(truth) == 0:
        raise LengthMismatch("cannot score an empty validation set")

    pred = np.array([bool(p) for p in predictions])
    true = np.array([bool(t) for t in truth])
    tp = int(np.sum(pred & true))
    fp = int(np.sum(pred & ~true))
    fn = int(np.sum(~pred & true))

    precision = division_or_default(tp, tp + fp)
    recall = division_or_default(tp, tp + fn)
    f1 = division_or_default(2.0 * precision * recall, precision + recall)
    return ValidationReport(f1, precision, recall, n_train, len(truth))


def is_confident(
    report: ValidationReport,
    db_size: int,
    batch_size: int,
    n_params: int,
    f1_threshold: float,
) -> bool:
    """
        Enough vectors evaluated (batch_size * n_params) and a validation F1
        at or above the threshold
    """
    if not 0.0 < f1_threshold <= 1.0:
        raise ValueError("f1_threshold must lie in (0, 1]")
    return db_size >= batch_size * n_params and report.f1 >= f1_threshold
