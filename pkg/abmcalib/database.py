"""
database.py

Ground-truth database: every evaluated parameter vector with its KS statistic
and label, persisted as JSON lines (one sample per line).
"""
import json
import logging
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Tuple

import numpy as np

from abmcalib.errors import DuplicateVector, EmptyDb, SchemaError
from abmcalib.ks import Label
from abmcalib.surrogate import TrainingSet

logger = logging.getLogger(__name__)

FIELDS = ("vector", "statistic", "label", "batch_index", "seed_used")


@dataclass(frozen=True)
class LabeledSample:
    vector: Tuple[float, ...]
    statistic: float
    label: Label
    batch_index: int
    seed_used: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "vector": [float(v) for v in self.vector],
                "statistic": float(self.statistic),
                "label": self.label.value,
                "batch_index": int(self.batch_index),
                "seed_used": int(self.seed_used),
            }
        )

    @classmethod
    def from_json(cls, text: str, line: int = 1) -> "LabeledSample":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(line, exc.msg)
        if not isinstance(data, dict) or set(data) != set(FIELDS):
            raise SchemaError(line, "expected fields %s" % ", ".join(FIELDS))
        try:
            vector = tuple(float(v) for v in data["vector"])
            label = Label(data["label"])
            batch_index = data["batch_index"]
            seed_used = data["seed_used"]
            if not isinstance(batch_index, int) or not isinstance(seed_used, int):
                raise TypeError("batch_index and seed_used must be integers")
            return cls(vector, float(data["statistic"]), label, batch_index, seed_used)
        except (TypeError, ValueError) as exc:
            raise SchemaError(line, str(exc))


class GroundTruthDb:
    """Append-only; no vector twice, batch indices non-decreasing."""

    def __init__(self, samples: Iterable[LabeledSample] = ()) -> None:
        self._samples: List[LabeledSample] = []
        self._seen = set()
        self.extend(samples)

    def append(self, sample: LabeledSample) -> None:
        if sample.vector in self._seen:
            raise DuplicateVector("vector %s already evaluated" % (sample.vector,))
        if self._samples and sample.batch_index < self._samples[-1].batch_index:
            raise ValueError("batch_index must be non-decreasing")
        self._samples.append(sample)
        self._seen.add(sample.vector)

    def extend(self, samples: Iterable[LabeledSample]) -> None:
        for s in samples:
            self.append(s)

    def __contains__(self, vector) -> bool:
        return tuple(float(v) for v in vector) in self._seen

    def __iter__(self) -> Iterator[LabeledSample]:
        return iter(self._samples)

    def __len__(self):
        return len(self._samples)

    def __getitem__(self, i) -> LabeledSample:
        return self._samples[i]

    def __eq__(self, other):
        if not isinstance(other, GroundTruthDb):
            return NotImplemented
        return self._samples == other._samples

    def __repr__(self):
        return "GroundTruthDb(%d samples)" % len(self)

    @property
    def samples(self) -> List[LabeledSample]:
        return list(self._samples)

    def statistics(self) -> np.ndarray:
        return np.array([s.statistic for s in self._samples])

    def training_set(self) -> TrainingSet:
        return TrainingSet.from_rows([(s.vector, s.label) for s in self._samples])


def best_candidate(db: GroundTruthDb) -> Tuple[Tuple[float, ...], float]:
    """
        Sample with the smallest statistic; the earliest inserted wins ties
    """
    if len(db) == 0:
        raise EmptyDb("no evaluated samples")
    best = min(db, key=lambda s: s.statistic)
    return best.vector, best.statistic


def persist_db(db: GroundTruthDb, path) -> None:
    with open(path, "w") as f:
        for sample in db:
            f.write(sample.to_json())
            f.write("\n")


def load_db(path) -> GroundTruthDb:
    db = GroundTruthDb()
    with open(path) as f:
        text = f.read()

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for i, line in enumerate(lines, start=1):
        sample = LabeledSample.from_json(line, i)
        try:
            db.append(sample)
        except (DuplicateVector, ValueError) as exc:
            raise SchemaError(i, str(exc))
    return db
