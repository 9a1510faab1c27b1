"""
abm.py

Continuous space virus spread model. Disease dynamics follow the
Susceptible-Infected-Recovered framework extended with a Dead compartment and
detection: agents that have been infected long enough are detected and
isolated (immobile but still infectious).

Notes
-----
Agents live on the unit torus. Every step runs, in order:

    1. movement      - non-isolated living agents take a step of length
                       ``speed`` along a freshly drawn uniform heading
    2. transmission  - every contact within ``interaction_radius`` between an
                       infected and a non-infected living agent is a trial with
                       probability beta (susceptible) or the reinfection
                       probability (recovered)
    3. detection     - infected for >= detection time -> isolated
    4. resolution    - infected for >= infection period -> Dead with the death
                       probability, Recovered otherwise
    5. record        - number of infected agents

Random numbers of step ``s`` come from a Philox stream whose counter is keyed
by ``s`` alone, so the first k steps of any run do not depend on the horizon.
"""
import json
import logging
import math
from dataclasses import dataclass, fields
from enum import IntEnum
from itertools import chain
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from abmcalib.errors import ConfigInvalid, OutOfRange, SchemaError, WrongArity

logger = logging.getLogger(__name__)

N_PARAMS = 7

PARAMETER_NAMES = (
    "transmission_probability",
    "reinfection_probability",
    "death_probability",
    "infection_period",
    "detection_time",
    "speed",
    "interaction_radius",
)

# open intervals, in AbmParams field order
PARAMETER_BOUNDS = (
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, 41.0),
    (0.0, 41.0),
    (0.0, 1.0),
    (0.0, 1.0),
)

TRUE_PARAMETERS = (0.639, 0.129, 0.44, 30.0, 14.0, 0.002, 0.012)

# 41 days == 1000 steps
STEPS_PER_DAY = 1000.0 / 41.0

_INIT_COUNTER = 1 << 128


class Status(IntEnum):
    SUSCEPTIBLE = 0
    INFECTED = 1
    RECOVERED = 2
    DEAD = 3


@dataclass(frozen=True)
class AbmParams:
    transmission_probability: float
    reinfection_probability: float
    death_probability: float
    infection_period: float
    detection_time: float
    speed: float
    interaction_radius: float

    def as_vector(self) -> List[float]:
        return [getattr(self, f.name) for f in fields(self)]


@dataclass(frozen=True)
class SimConfig:
    population_size: int = 500
    initial_infected: int = 5
    horizon_steps: int = 2000
    steps_per_day: float = STEPS_PER_DAY

    def validate(self) -> None:
        if self.population_size < 1:
            raise ConfigInvalid("population_size must be positive")
        if not 1 <= self.initial_infected <= self.population_size:
            raise ConfigInvalid(
                "initial_infected must lie in [1, population_size], got %d"
                % self.initial_infected
            )
        if self.horizon_steps < 1:
            raise ConfigInvalid("horizon_steps must be >= 1")
        if not self.steps_per_day > 0:
            raise ConfigInvalid("steps_per_day must be positive")


class AgentState:
    def __init__(
        self,
        position: np.ndarray,
        heading: float,
        status: Status,
        infected_since: Optional[int],
        isolated: bool,
    ) -> None:
        """
            Read-only snapshot of one agent
        :param position: point in [0, 1)^2
        :param heading: radians
        :param status: compartment
        :param infected_since: step of infection, None unless infected
        :param isolated: detected and immobilized
        """
        self.position = position
        self.heading = heading
        self.status = status
        self.infected_since = infected_since
        self.isolated = isolated

    def __repr__(self):
        return "Agent: %s at (%1.3f, %1.3f)%s" % (
            self.status.name,
            self.position[0],
            self.position[1],
            " isolated" if self.isolated else "",
        )


class EpidemicSeries:
    """Number of infected individuals per simulation step."""

    def __init__(self, counts: Sequence[int]) -> None:
        arr = np.asarray(counts)
        if arr.ndim != 1:
            raise ValueError("series must be one dimensional")
        if arr.size and (np.any(arr < 0) or np.any(arr != np.round(arr))):
            raise ValueError("series entries must be non-negative integers")
        self._counts = arr.astype(np.int64)
        self._counts.setflags(write=False)

    @property
    def counts(self) -> np.ndarray:
        return self._counts

    def total(self) -> int:
        return int(self._counts.sum())

    def scaled(self, k: int) -> "EpidemicSeries":
        return EpidemicSeries(self._counts * k)

    def __len__(self):
        return len(self._counts)

    def __eq__(self, other):
        if not isinstance(other, EpidemicSeries):
            return NotImplemented
        return np.array_equal(self._counts, other._counts)

    def __repr__(self):
        return "EpidemicSeries(len=%d, peak=%d)" % (
            len(self),
            self._counts.max() if len(self) else 0,
        )

    def to_csv(self, path) -> None:
        pd.DataFrame({"infected": self._counts}).to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path) -> "EpidemicSeries":
        try:
            frame = pd.read_csv(path)
        except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
            raise SchemaError(1, "unreadable series file: %s" % exc) from exc
        if list(frame.columns) != ["infected"]:
            raise SchemaError(1, "expected a single 'infected' column")
        raw = frame["infected"]
        counts = pd.to_numeric(raw, errors="coerce")
        bad = np.flatnonzero((counts.isna() | (counts < 0) | (counts != counts.round())).to_numpy())
        if len(bad):
            # header is line 1
            raise SchemaError(
                int(bad[0]) + 2, "expected a non-negative integer count, got %r" % raw.iloc[bad[0]]
            )
        return cls(counts.to_numpy())

    def to_json(self) -> str:
        return json.dumps([int(c) for c in self._counts])

    @classmethod
    def from_json(cls, text: str) -> "EpidemicSeries":
        data = json.loads(text)
        if not isinstance(data, list):
            raise SchemaError(1, "expected a JSON array of counts")
        return cls(data)


def validate_params(raw: Sequence[float]) -> AbmParams:
    """
        Checks a raw 7-vector (AbmParams field order) against the open parameter intervals
    :param raw: sequence of 7 reals
    :return: AbmParams
    """
    values = [float(v) for v in raw]
    if len(values) != N_PARAMS:
        raise WrongArity(N_PARAMS, len(values))

    for i, (value, (low, high)) in enumerate(zip(values, PARAMETER_BOUNDS)):
        if not (low < value < high):
            raise OutOfRange(i + 1, value, low, high)

    return AbmParams(*values)


def days_to_steps(days: float, steps_per_day: float) -> int:
    return max(1, int(math.floor(days * steps_per_day + 0.5)))


class VirusSpreadModel:
    def __init__(self, params: AbmParams, cfg: SimConfig, seed: int) -> None:
        if seed < 0:
            raise ValueError("seed must be non-negative")
        self.params = params
        self.cfg = cfg
        self.seed = int(seed)
        self.detection_steps = days_to_steps(params.detection_time, cfg.steps_per_day)
        self.infection_steps = days_to_steps(params.infection_period, cfg.steps_per_day)
        self.step_index = 0

        n = cfg.population_size
        rng = self._rng(_INIT_COUNTER)
        self.position = rng.random((n, 2))
        self.heading = rng.uniform(0.0, 2.0 * np.pi, n)
        self.status = np.full(n, Status.SUSCEPTIBLE, dtype=np.int8)
        self.infected_since = np.full(n, -1, dtype=np.int64)
        self.isolated = np.zeros(n, dtype=bool)

        seeded = rng.choice(n, size=cfg.initial_infected, replace=False)
        self.status[seeded] = Status.INFECTED
        self.infected_since[seeded] = 0

    def _rng(self, counter: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.seed, counter=counter))

    def move(self, rng: np.random.Generator) -> None:
        n = self.cfg.population_size
        self.heading = rng.uniform(0.0, 2.0 * np.pi, n)
        mobile = (self.status != Status.DEAD) & ~self.isolated
        delta = self.params.speed * np.column_stack(
            (np.cos(self.heading), np.sin(self.heading))
        )
        self.position[mobile] += delta[mobile]
        np.mod(self.position, 1.0, out=self.position)
        # mod can round tiny negatives up to exactly 1.0
        self.position[self.position >= 1.0] = 0.0

    def contacts(self) -> np.ndarray:
        """
            Infected agents paired with every susceptible or recovered agent
            within the interaction radius on the torus, sorted lexicographically
        :return: (m, 2) array of (infected, other) agent indices
        """
        sources = np.flatnonzero(self.status == Status.INFECTED)
        targets = np.flatnonzero(
            (self.status == Status.SUSCEPTIBLE) | (self.status == Status.RECOVERED)
        )
        if len(sources) == 0 or len(targets) == 0:
            return np.empty((0, 2), dtype=np.int64)

        tree = cKDTree(self.position[targets], boxsize=1.0)
        near = tree.query_ball_point(
            self.position[sources], self.params.interaction_radius, return_sorted=True
        )
        sizes = np.fromiter((len(hit) for hit in near), dtype=np.int64, count=len(near))
        hits = np.fromiter(chain.from_iterable(near), dtype=np.int64, count=int(sizes.sum()))
        return np.column_stack((np.repeat(sources, sizes), targets[hits]))

    def transmit(self, rng: np.random.Generator) -> None:
        pairs = self.contacts()
        targets = pairs[:, 1]
        prob = np.where(
            self.status[targets] == Status.SUSCEPTIBLE,
            self.params.transmission_probability,
            self.params.reinfection_probability,
        )
        hits = np.unique(targets[rng.random(len(targets)) < prob])

        self.status[hits] = Status.INFECTED
        self.infected_since[hits] = self.step_index

    def detect(self) -> None:
        infected = self.status == Status.INFECTED
        duration = self.step_index - self.infected_since
        self.isolated |= infected & (duration >= self.detection_steps)

    def resolve(self, rng: np.random.Generator) -> None:
        u = rng.random(self.cfg.population_size)
        infected = self.status == Status.INFECTED
        due = infected & (self.step_index - self.infected_since >= self.infection_steps)
        dies = due & (u < self.params.death_probability)

        self.status[dies] = Status.DEAD
        self.status[due & ~dies] = Status.RECOVERED
        self.infected_since[due] = -1
        self.isolated[due] = False

    def step(self) -> int:
        """
            Advances one step
        :return: number of infected agents after the step
        """
        self.step_index += 1
        rng = self._rng(self.step_index << 64)
        self.move(rng)
        self.transmit(rng)
        self.detect()
        self.resolve(rng)
        return self.n_infected()

    def n_infected(self) -> int:
        return int(np.count_nonzero(self.status == Status.INFECTED))

    def compartment_counts(self) -> Dict[Status, int]:
        counts = np.bincount(self.status, minlength=len(Status))
        return {s: int(counts[s]) for s in Status}

    def agent(self, i: int) -> AgentState:
        since = int(self.infected_since[i])
        return AgentState(
            self.position[i].copy(),
            float(self.heading[i]),
            Status(int(self.status[i])),
            since if since >= 0 else None,
            bool(self.isolated[i]),
        )

    def run(self) -> EpidemicSeries:
        horizon = self.cfg.horizon_steps
        counts = np.zeros(horizon, dtype=np.int64)
        for t in range(horizon):
            counts[t] = self.step()
            if counts[t] == 0:
                # nobody left to infect anyone, the rest of the series is zero
                logger.debug("epidemic died out at step %d", self.step_index)
                break
        return EpidemicSeries(counts)


def simulate(params: AbmParams, cfg: SimConfig, seed: int) -> EpidemicSeries:
    """
        Runs the model for cfg.horizon_steps steps
    :param params: validated parameters
    :param cfg: simulation configuration
    :param seed: master seed of the run
    :return: infected count per step
    """
    return VirusSpreadModel(params, cfg, seed).run()
