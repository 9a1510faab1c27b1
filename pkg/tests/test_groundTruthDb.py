from unittest import TestCase

import numpy as np
import pytest

from abmcalib.database import GroundTruthDb, LabeledSample, best_candidate, load_db, persist_db
from abmcalib.errors import DuplicateVector, EmptyDb, SchemaError
from abmcalib.ks import Label


def sample(i, statistic, batch_index=1, label=Label.NEGATIVE):
    vector = (0.1 * i, 0.2, 0.3, 30.0, 14.0, 0.002, 0.012)
    return LabeledSample(vector, statistic, label, batch_index, 1000 + i)


class TestGroundTruthDb(TestCase):
    def test_Append(self):
        db = GroundTruthDb([sample(1, 0.3), sample(2, 0.1)])
        self.assertEqual(len(db), 2)
        self.assertIn(sample(1, 0.3).vector, db)
        np.testing.assert_array_equal(db.statistics(), [0.3, 0.1])

    def test_Duplicate(self):
        db = GroundTruthDb([sample(1, 0.3)])
        with self.assertRaises(DuplicateVector):
            db.append(sample(1, 0.2))

    def test_BatchOrder(self):
        db = GroundTruthDb([sample(1, 0.3, batch_index=2)])
        with self.assertRaises(ValueError):
            db.append(sample(2, 0.3, batch_index=1))

    def test_TrainingSet(self):
        db = GroundTruthDb([sample(1, 0.01, label=Label.POSITIVE), sample(2, 0.5)])
        rows = db.training_set()
        self.assertEqual(rows.features.shape, (2, 7))
        np.testing.assert_array_equal(rows.positive, [True, False])


class TestBestCandidate(TestCase):
    def test_Minimum(self):
        db = GroundTruthDb([sample(1, 0.3), sample(2, 0.1), sample(3, 0.2)])
        self.assertEqual(best_candidate(db), (sample(2, 0.1).vector, 0.1))

    def test_TieGoesToFirst(self):
        db = GroundTruthDb([sample(1, 0.1), sample(2, 0.1, batch_index=2)])
        self.assertEqual(best_candidate(db)[0], sample(1, 0.1).vector)

    def test_Single(self):
        db = GroundTruthDb([sample(4, 0.7)])
        self.assertEqual(best_candidate(db), (sample(4, 0.7).vector, 0.7))

    def test_Empty(self):
        with self.assertRaises(EmptyDb):
            best_candidate(GroundTruthDb())


def test_persist_and_load(tmp_path):
    rng = np.random.default_rng(0)
    db = GroundTruthDb()
    for i in range(500):
        vector = tuple(float(v) for v in rng.random(7))
        label = Label.POSITIVE if i % 3 == 0 else Label.NEGATIVE
        db.append(LabeledSample(vector, float(rng.random()), label, 1 + i // 50, int(rng.integers(2**62))))
    path = tmp_path / "db.jsonl"
    persist_db(db, path)
    assert load_db(path) == db
    assert len(path.read_text().splitlines()) == 500


def test_field_order(tmp_path):
    path = tmp_path / "db.jsonl"
    persist_db(GroundTruthDb([sample(1, 0.25)]), path)
    line = path.read_text().splitlines()[0]
    positions = [line.index('"%s"' % k) for k in ("vector", "statistic", "label", "batch_index", "seed_used")]
    assert positions == sorted(positions)


def test_empty_file(tmp_path):
    path = tmp_path / "db.jsonl"
    path.write_text("")
    assert len(load_db(path)) == 0


def test_truncated_last_line(tmp_path):
    path = tmp_path / "db.jsonl"
    persist_db(GroundTruthDb([sample(1, 0.3), sample(2, 0.2)]), path)
    text = path.read_text()
    path.write_text(text[: len(text) - 10])
    with pytest.raises(SchemaError) as info:
        load_db(path)
    assert info.value.line == 2


@pytest.mark.parametrize(
    "line",
    [
        '{"vector": [0.1], "statistic": 0.1, "label": "Maybe", "batch_index": 1, "seed_used": 1}',
        '{"vector": [0.1], "statistic": 0.1, "label": "Positive", "batch_index": 1}',
        '{"vector": [0.1], "statistic": 0.1, "label": "Positive", "batch_index": 1.5, "seed_used": 1}',
        "[1, 2, 3]",
    ],
)
def test_malformed_lines(tmp_path, line):
    path = tmp_path / "db.jsonl"
    path.write_text(line + "\n")
    with pytest.raises(SchemaError) as info:
        load_db(path)
    assert info.value.line == 1


def test_duplicate_line_is_a_schema_error(tmp_path):
    path = tmp_path / "db.jsonl"
    line = sample(1, 0.3).to_json()
    path.write_text(line + "\n" + line + "\n")
    with pytest.raises(SchemaError) as info:
        load_db(path)
    assert info.value.line == 2
