"""
sobol.py

Unscrambled Sobol low-discrepancy sequence, Gray-code construction with
32-bit direction integers.

Notes
-----
Dimension 1 uses the van der Corput directions (all m_k = 1). Higher
dimensions use the primitive polynomials and initial direction numbers of the
Joe-Kuo ``new-joe-kuo-6.21201`` table. The all-zero point of index 0 is never
emitted.
"""
import logging
from typing import List, Sequence, Tuple

import numpy as np

from abmcalib.errors import BadRange, IndexOverflow, UnsupportedDimension

logger = logging.getLogger(__name__)

BITS = 32

# (degree s, coefficients a, initial m_1..m_s) for dimensions 2, 3, ...
JOE_KUO_TABLE = (
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
    (5, 4, (1, 1, 5, 5, 5)),
    (5, 7, (1, 1, 7, 11, 19)),
    (5, 11, (1, 1, 5, 1, 1)),
    (5, 13, (1, 1, 1, 3, 11)),
)

MAX_DIMENSION = len(JOE_KUO_TABLE) + 1
MAX_POINTS = 2 ** BITS - 1


def direction_integers(dimension: int) -> List[int]:
    """
        Direction integers V_1..V_32 of one (1-based) dimension,
        V_k = m_k * 2^(32 - k)
    :param dimension: 1-based dimension
    """
    if dimension == 1:
        return [1 << (BITS - k) for k in range(1, BITS + 1)]

    s, a, m = JOE_KUO_TABLE[dimension - 2]
    v = [0] * (BITS + 1)
    for k in range(1, s + 1):
        v[k] = m[k - 1] << (BITS - k)
    for k in range(s + 1, BITS + 1):
        v[k] = v[k - s] ^ (v[k - s] >> s)
        for j in range(1, s):
            v[k] ^= ((a >> (s - 1 - j)) & 1) * v[k - j]
    return v[1:]


def rightmost_zero_bit(n: int) -> int:
    """1-based position of the lowest zero bit of n."""
    c = 1
    while n & 1:
        n >>= 1
        c += 1
    return c


class SobolGenerator:
    def __init__(self, dimension: int) -> None:
        if not 1 <= dimension <= MAX_DIMENSION:
            raise UnsupportedDimension(
                "dimension must lie in [1, %d], got %r" % (MAX_DIMENSION, dimension)
            )
        self._dimension = dimension
        self.index = 0
        self.direction_numbers = np.array(
            [direction_integers(d) for d in range(1, dimension + 1)], dtype=np.uint64
        )
        self.state = np.zeros(dimension, dtype=np.uint64)

    @property
    def dimension(self) -> int:
        return self._dimension

    def next_point(self) -> np.ndarray:
        if self.index >= MAX_POINTS:
            raise IndexOverflow("Sobol generator exhausted after %d points" % MAX_POINTS)
        c = rightmost_zero_bit(self.index)
        self.state ^= self.direction_numbers[:, c - 1]
        self.index += 1
        return self.state.astype(np.float64) / float(2 ** BITS)

    def take(self, n: int) -> np.ndarray:
        """
            Next n points as an (n, dimension) array
        """
        points = np.empty((n, self._dimension))
        for i in range(n):
            points[i] = self.next_point()
        return points

    def clone(self) -> "SobolGenerator":
        other = SobolGenerator(self._dimension)
        other.index = self.index
        other.state = self.state.copy()
        return other

    def __repr__(self):
        return "SobolGenerator(dimension=%d, index=%d)" % (self._dimension, self.index)


def new_sobol(dimension: int) -> SobolGenerator:
    return SobolGenerator(dimension)


def next_point(gen: SobolGenerator) -> np.ndarray:
    return gen.next_point()


def scale_point(
    unit_point: Sequence[float], ranges: Sequence[Tuple[float, float]]
) -> np.ndarray:
    """
        Maps a point of [0, 1)^d into the open box prod (low_i, high_i).
        Coordinates landing on a bound are moved one ulp inside.
    :param unit_point: coordinates in [0, 1), one point or an (n, d) array
    :param ranges: (low, high) per coordinate
    :return: scaled vector(s)
    """
    unit = np.asarray(unit_point, dtype=np.float64)
    bounds = np.asarray(ranges, dtype=np.float64)
    if bounds.ndim != 2 or bounds.shape != (unit.shape[-1], 2):
        raise BadRange("expected %d (low, high) pairs" % unit.shape[-1])
    low, high = bounds[:, 0], bounds[:, 1]
    if not np.all(np.isfinite(bounds)) or np.any(low >= high):
        raise BadRange("every range needs finite low < high")

    out = low + unit * (high - low)
    out = np.where(out <= low, np.nextafter(low, high), out)
    out = np.where(out >= high, np.nextafter(high, low), out)
    return out
