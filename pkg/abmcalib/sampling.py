"""
sampling.py

Candidate pools for the four sampling methods: plain random, quasi-random
Sobol, and their surrogate assisted variants, which rebuild the pool with an
epsilon-greedy draw over the surrogate's predictions.
"""
import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from abmcalib.abm import N_PARAMS, PARAMETER_BOUNDS
from abmcalib.errors import ConfigInvalid, PoolExhausted, UnsupportedDimension
from abmcalib.sobol import SobolGenerator, scale_point

logger = logging.getLogger(__name__)


class SamplerKind(enum.Enum):
    RANDOM = "Random"
    SOBOL = "Sobol"
    SURROGATE_RANDOM = "SurrogateRandom"
    SURROGATE_SOBOL = "SurrogateSobol"

    @property
    def assisted(self) -> bool:
        return self in (SamplerKind.SURROGATE_RANDOM, SamplerKind.SURROGATE_SOBOL)

    @property
    def base(self) -> "SamplerKind":
        if self in (SamplerKind.RANDOM, SamplerKind.SURROGATE_RANDOM):
            return SamplerKind.RANDOM
        return SamplerKind.SOBOL


@dataclass
class ParameterRanges:
    """
    Open interval per parameter and the parameters pinned to a
    value instead of being calibrated. ``fixed`` keys are 0-based indices.
    """

    bounds: Tuple[Tuple[float, float], ...] = PARAMETER_BOUNDS
    fixed: Dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        self.bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        self.fixed = {int(k): float(v) for k, v in self.fixed.items()}

    def validate(self) -> None:
        if len(self.bounds) != N_PARAMS:
            raise ConfigInvalid("ranges need %d (low, high) pairs" % N_PARAMS)
        for i, (lo, hi) in enumerate(self.bounds):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ConfigInvalid("range %d must satisfy low < high" % (i + 1))
        for i, v in self.fixed.items():
            if not 0 <= i < N_PARAMS:
                raise ConfigInvalid("fixed index %d out of range" % i)
            lo, hi = self.bounds[i]
            if not lo < v < hi:
                raise ConfigInvalid("fixed value of parameter %d outside its range" % (i + 1))
        if not self.free_indices:
            raise ConfigInvalid("at least one parameter must be calibrated")

    @classmethod
    def calibrating(
        cls,
        n_params: int,
        true_vector: Sequence[float],
        bounds: Sequence[Tuple[float, float]] = PARAMETER_BOUNDS,
    ) -> "ParameterRanges":
        """
            Calibrates parameters 1..n_params and pins the rest to true_vector
        """
        fixed = {i: float(true_vector[i]) for i in range(n_params, N_PARAMS)}
        return cls(tuple(bounds), fixed)

    @property
    def free_indices(self) -> List[int]:
        return [i for i in range(len(self.bounds)) if i not in self.fixed]

    @property
    def free_bounds(self) -> List[Tuple[float, float]]:
        return [self.bounds[i] for i in self.free_indices]

    @property
    def widths(self) -> np.ndarray:
        b = np.asarray(self.bounds)
        return b[:, 1] - b[:, 0]

    def embed(self, free_values: np.ndarray) -> np.ndarray:
        """
            Full vectors from values of the free coordinates
        :param free_values: (n, n_free) array
        :return: (n, 7) array
        """
        free_values = np.atleast_2d(free_values)
        out = np.empty((len(free_values), len(self.bounds)))
        for i, v in self.fixed.items():
            out[:, i] = v
        out[:, self.free_indices] = free_values
        return out

    def contains(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.atleast_2d(vectors)
        b = np.asarray(self.bounds)
        return np.all((vectors > b[:, 0]) & (vectors < b[:, 1]), axis=1)

    def to_dict(self) -> dict:
        return {
            "bounds": [list(b) for b in self.bounds],
            "fixed": {str(k): v for k, v in sorted(self.fixed.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ParameterRanges":
        unknown = set(data) - {"bounds", "fixed"}
        if unknown:
            raise ConfigInvalid("unknown ranges keys: %s" % sorted(unknown))
        bounds = data.get("bounds", PARAMETER_BOUNDS)
        fixed = data.get("fixed", {})
        try:
            return cls(tuple(tuple(b) for b in bounds), dict(fixed))
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid("malformed ranges: %s" % exc)


class CandidatePool:
    def __init__(self, vectors: np.ndarray, origin: SamplerKind) -> None:
        self._vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
        if self._vectors.size == 0:
            self._vectors = np.empty((0, N_PARAMS))
        self.origin = origin

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    def remove(self, indices: np.ndarray) -> None:
        keep = np.ones(len(self._vectors), dtype=bool)
        keep[indices] = False
        self._vectors = self._vectors[keep]

    def __len__(self):
        return len(self._vectors)

    def __repr__(self):
        return "CandidatePool(%s, %d vectors)" % (self.origin.value, len(self))


def unique_rows(vectors: np.ndarray) -> np.ndarray:
    """Drops repeated rows, keeping first occurrences in order."""
    if len(vectors) == 0:
        return vectors
    _, first = np.unique(vectors, axis=0, return_index=True)
    if len(first) < len(vectors):
        logger.warning("dropped %d duplicate candidates", len(vectors) - len(first))
    return vectors[np.sort(first)]


def generate_pool_random(n: int, ranges: ParameterRanges, seed) -> CandidatePool:
    """
        n candidates, free coordinates uniform on their open intervals
    :param n: pool size
    :param ranges: ParameterRanges
    :param seed: anything numpy.random.default_rng accepts
    """
    rng = np.random.default_rng(seed)
    unit = rng.random((n, len(ranges.free_indices)))
    free = scale_point(unit, ranges.free_bounds)
    return CandidatePool(unique_rows(ranges.embed(free)), SamplerKind.RANDOM)


def generate_pool_sobol(
    n: int, ranges: ParameterRanges, gen: SobolGenerator
) -> CandidatePool:
    """
        Next n Sobol points scaled into the free ranges; gen advances by n
    """
    if gen.dimension != len(ranges.free_indices):
        raise UnsupportedDimension(
            "generator dimension %d != %d calibrated parameters"
            % (gen.dimension, len(ranges.free_indices))
        )
    free = scale_point(gen.take(n), ranges.free_bounds)
    return CandidatePool(unique_rows(ranges.embed(free)), SamplerKind.SOBOL)


def draw_minibatch(pool: CandidatePool, batch_size: int, seed) -> np.ndarray:
    """
        Uniform draw without replacement; drawn vectors leave the pool
    :return: (batch_size, 7) array
    """
    if batch_size > len(pool):
        raise PoolExhausted(
            "cannot draw %d candidates from a pool of %d" % (batch_size, len(pool))
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(pool), size=batch_size, replace=False)
    batch = pool.vectors[chosen].copy()
    pool.remove(chosen)
    return batch


def reinitialize_pool_epsilon_greedy(
    model,
    kind: SamplerKind,
    n: int,
    epsilon_positive: float,
    ranges: ParameterRanges,
    seed,
    gen: Optional[SobolGenerator] = None,
    oversample: int = 2,
) -> CandidatePool:
    """
        Rebuilds the pool from a fresh raw pool of oversample * n candidates.
        Each slot takes a predicted positive with probability epsilon_positive
        and a predicted negative otherwise; when one side runs out the other
        side fills the remaining slots.

    :param model: trained surrogate (anything with predict_many)
    :param kind: base method, SamplerKind.RANDOM or SamplerKind.SOBOL
    :param n: output pool size
    :param epsilon_positive: probability of drawing a predicted positive
    :param ranges: ParameterRanges
    :param seed: seed of the raw pool (random) and of the slot draws
    :param gen: Sobol generator, required iff kind is SOBOL
    :param oversample: raw pool size factor
    """
    if not 0.0 <= epsilon_positive <= 1.0:
        raise ValueError("epsilon_positive must lie in [0, 1]")
    if kind is SamplerKind.RANDOM:
        if gen is not None:
            raise ValueError("a Sobol generator is only used with kind=Sobol")
        raw = generate_pool_random(oversample * n, ranges, seed)
        origin = SamplerKind.SURROGATE_RANDOM
    elif kind is SamplerKind.SOBOL:
        if gen is None:
            raise ValueError("kind=Sobol needs a Sobol generator")
        raw = generate_pool_sobol(oversample * n, ranges, gen)
        origin = SamplerKind.SURROGATE_SOBOL
    else:
        raise ValueError("kind must be a base method, got %s" % kind.value)

    predicted = np.asarray(model.predict_many(raw.vectors), dtype=bool)
    rng = np.random.default_rng([seed, 1] if np.isscalar(seed) else seed)
    positives = list(rng.permutation(np.flatnonzero(predicted)))
    negatives = list(rng.permutation(np.flatnonzero(~predicted)))
    wants_positive = rng.random(n) < epsilon_positive

    chosen = []
    for want in wants_positive:
        first, second = (positives, negatives) if want else (negatives, positives)
        if first:
            chosen.append(first.pop())
        elif second:
            chosen.append(second.pop())
        else:
            break

    chosen = np.asarray(chosen, dtype=np.int64)
    share = float(predicted[chosen].mean()) if len(chosen) else 0.0
    logger.info(
        "re-initialised %s pool: %d candidates, %.3f predicted positive (%d of %d raw)",
        origin.value,
        len(chosen),
        share,
        int(predicted.sum()),
        len(raw),
    )
    return CandidatePool(raw.vectors[chosen], origin)
