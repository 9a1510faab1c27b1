from unittest import TestCase

import numpy as np
import pytest

from abmcalib.errors import LengthMismatch, TooFewRows
from abmcalib.ks import Label
from abmcalib.surrogate import TrainingSet
from abmcalib.validation import (
    ValidationReport,
    division_or_default,
    f1_score,
    is_confident,
    split_train_validation,
)

P, N = Label.POSITIVE, Label.NEGATIVE


class TestF1Score(TestCase):
    def test_Half(self):
        report = f1_score([P, P, N, N], [P, N, P, N])
        self.assertEqual(report.precision, 0.5)
        self.assertEqual(report.recall, 0.5)
        self.assertEqual(report.f1, 0.5)
        self.assertEqual(report.n_val, 4)

    def test_Perfect(self):
        self.assertEqual(f1_score([P, N], [P, N]).f1, 1.0)

    def test_NoPositivePredicted(self):
        report = f1_score([N, N, N], [P, N, N])
        self.assertEqual(report.precision, 0.0)
        self.assertEqual(report.f1, 0.0)

    def test_BooleanInput(self):
        report = f1_score(np.array([True, False]), np.array([True, True]), n_train=8)
        self.assertAlmostEqual(report.f1, 2 / 3)
        self.assertEqual(report.n_train, 8)

    def test_LengthMismatch(self):
        with self.assertRaises(LengthMismatch):
            f1_score([P], [P, N])
        with self.assertRaises(LengthMismatch):
            f1_score([], [])


def test_division_or_default():
    assert division_or_default(1.0, 4.0) == 0.25
    assert division_or_default(1.0, 0.0) == 0.0


def _rows(n_pos, n_neg):
    X = np.arange(n_pos + n_neg, dtype=float)[:, np.newaxis]
    return TrainingSet(X, np.r_[np.ones(n_pos, dtype=bool), np.zeros(n_neg, dtype=bool)])


def test_stratified_split():
    train, val = split_train_validation(_rows(4, 6), 0.8, seed=1)
    assert len(train) == 8 and len(val) == 2
    assert train.positive.sum() == 3
    assert val.positive.sum() == 1
    both = np.sort(np.r_[train.features[:, 0], val.features[:, 0]])
    np.testing.assert_array_equal(both, np.arange(10.0))


def test_every_class_on_both_sides():
    train, val = split_train_validation(_rows(2, 40), 0.8, seed=0)
    assert train.has_both_classes()
    assert val.has_both_classes()


def test_unstratified_when_a_class_is_a_singleton():
    train, val = split_train_validation(_rows(1, 5), 0.8, seed=2)
    assert len(train) == 5 and len(val) == 1


def test_split_is_seeded():
    a = split_train_validation(_rows(10, 30), 0.8, seed=4)
    b = split_train_validation(_rows(10, 30), 0.8, seed=4)
    np.testing.assert_array_equal(a[0].features, b[0].features)
    np.testing.assert_array_equal(a[1].features, b[1].features)


def test_split_needs_rows():
    with pytest.raises(TooFewRows):
        split_train_validation(_rows(2, 2), 0.8, seed=0)
    with pytest.raises(TooFewRows):
        split_train_validation(_rows(3, 3), 1.0, seed=0)


def test_confidence_gate():
    good = ValidationReport(0.9, 0.9, 0.9, 120, 30)
    assert is_confident(good, 150, 50, 3, 0.9)
    assert not is_confident(good, 149, 50, 3, 0.9)
    weak = ValidationReport(0.89, 0.9, 0.88, 120, 30)
    assert not is_confident(weak, 1000, 50, 3, 0.9)
    with pytest.raises(ValueError):
        is_confident(good, 150, 50, 3, 0.0)
