"""
config.py

Calibration configuration, named profiles and JSON config files.

A config file is a JSON document whose keys mirror the CalibrationConfig
field names; ``ranges`` and ``sim`` are nested documents mirroring
ParameterRanges and SimConfig. Unknown keys are rejected.
"""
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Union, get_args, get_origin, get_type_hints

from abmcalib.abm import SimConfig
from abmcalib.errors import ConfigInvalid
from abmcalib.ks import CRITICAL_COEFFICIENTS
from abmcalib.sampling import ParameterRanges, SamplerKind
from abmcalib.surrogate import HYPER_CLASSES, SurrogateKind, make_hyper

logger = logging.getLogger(__name__)

# JSON types accepted for each scalar field annotation
_SCALAR_TYPES = {bool: (bool,), int: (int,), float: (int, float)}


def check_field_types(data: Dict[str, Any], cls: type, prefix: str = "") -> None:
    """
        Rejects values whose JSON type does not fit the scalar field they set
    :param data: document keyed by dataclass field names
    :param cls: dataclass the document configures
    :param prefix: shown in front of the field name in the error
    """
    hints = get_type_hints(cls)
    for name, value in data.items():
        expected = hints.get(name)
        nullable = False
        if get_origin(expected) is Union:
            args = get_args(expected)
            nullable = type(None) in args
            expected = next(a for a in args if a is not type(None))
        if expected not in _SCALAR_TYPES or (value is None and nullable):
            continue
        # bool is an int subclass
        if isinstance(value, bool) != (expected is bool) or not isinstance(
            value, _SCALAR_TYPES[expected]
        ):
            raise ConfigInvalid(
                "%s%s must be %s, got %r" % (prefix, name, expected.__name__, value)
            )


@dataclass
class CalibrationConfig:
    sampler_kind: SamplerKind = SamplerKind.RANDOM
    surrogate_kind: SurrogateKind = SurrogateKind.NONE
    abm_min_budget: int = 500
    abm_max_budget: int = 2500
    batch_size: int = 50
    ks_threshold: float = 0.005
    alpha: float = 0.01
    epsilon_positive: float = 0.9
    ranges: ParameterRanges = field(default_factory=ParameterRanges)
    sim: SimConfig = field(default_factory=SimConfig)
    master_seed: int = 0
    pool_size: int = 10_000
    pool_oversample: int = 2
    train_ratio: float = 0.8
    f1_threshold: float = 0.9
    surrogate_hyper: Dict[str, Any] = field(default_factory=dict)
    class_weighting: bool = False
    common_random_numbers: bool = False
    threads: int = 1

    @property
    def n_params(self) -> int:
        return len(self.ranges.free_indices)

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ConfigInvalid("batch_size must be positive")
        if not 0 < self.abm_min_budget <= self.abm_max_budget:
            raise ConfigInvalid("need 0 < abm_min_budget <= abm_max_budget")
        for name in ("abm_min_budget", "abm_max_budget"):
            if getattr(self, name) % self.batch_size:
                raise ConfigInvalid("%s must be a multiple of batch_size" % name)
        if self.sampler_kind.assisted == (self.surrogate_kind is SurrogateKind.NONE):
            raise ConfigInvalid(
                "sampler %s does not go with surrogate %s"
                % (self.sampler_kind.value, self.surrogate_kind.value)
            )
        if not 0.0 <= self.epsilon_positive <= 1.0:
            raise ConfigInvalid("epsilon_positive must lie in [0, 1]")
        if not any(abs(self.alpha - a) < 1e-12 for a in CRITICAL_COEFFICIENTS):
            raise ConfigInvalid("alpha %r has no critical value" % self.alpha)
        if not 0.0 < self.train_ratio < 1.0:
            raise ConfigInvalid("train_ratio must lie in (0, 1)")
        if not 0.0 < self.f1_threshold <= 1.0:
            raise ConfigInvalid("f1_threshold must lie in (0, 1]")
        if self.pool_size < self.batch_size:
            raise ConfigInvalid("pool_size must hold at least one batch")
        if self.pool_oversample < 1:
            raise ConfigInvalid("pool_oversample must be >= 1")
        if self.master_seed < 0:
            raise ConfigInvalid("master_seed must be non-negative")
        if self.threads < 1:
            raise ConfigInvalid("threads must be >= 1")
        if self.surrogate_kind is not SurrogateKind.NONE:
            make_hyper(self.surrogate_kind, self.surrogate_hyper)
            check_field_types(
                self.surrogate_hyper, HYPER_CLASSES[self.surrogate_kind], "surrogate_hyper."
            )
        self.ranges.validate()
        self.sim.validate()

    def to_dict(self) -> Dict[str, Any]:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "ranges":
                value = value.to_dict()
            elif f.name == "sim":
                value = asdict(value)
            elif isinstance(value, (SamplerKind, SurrogateKind)):
                value = value.value
            out[f.name] = value
        return out


PROFILES = {
    "paper": dict(
        abm_min_budget=500,
        abm_max_budget=2500,
        batch_size=50,
        sim=SimConfig(population_size=500, initial_infected=5, horizon_steps=2000),
    ),
    "desk": dict(
        abm_min_budget=200,
        abm_max_budget=1000,
        batch_size=25,
        sim=SimConfig(population_size=300, initial_infected=3, horizon_steps=2000),
    ),
}


def profile(name: str) -> CalibrationConfig:
    if name not in PROFILES:
        raise ConfigInvalid("unknown profile %r, choose from %s" % (name, sorted(PROFILES)))
    return CalibrationConfig(**PROFILES[name])


def _sim_from_dict(data: Dict[str, Any], base: SimConfig) -> SimConfig:
    unknown = set(data) - {f.name for f in fields(SimConfig)}
    if unknown:
        raise ConfigInvalid("unknown sim keys: %s" % sorted(unknown))
    check_field_types(data, SimConfig, "sim.")
    return replace(base, **data)


def config_from_dict(data: Dict[str, Any], base: CalibrationConfig = None) -> CalibrationConfig:
    """
        Applies a config document on top of base (the "paper" profile by default)
    """
    cfg = base if base is not None else profile("paper")
    names = {f.name for f in fields(CalibrationConfig)}
    unknown = set(data) - names
    if unknown:
        raise ConfigInvalid("unknown config keys: %s" % sorted(unknown))
    for name in ("ranges", "sim", "surrogate_hyper"):
        if name in data and not isinstance(data[name], dict):
            raise ConfigInvalid("%s must be a JSON object" % name)
    check_field_types(data, CalibrationConfig)

    values = dict(data)
    try:
        if "sampler_kind" in values:
            values["sampler_kind"] = SamplerKind(values["sampler_kind"])
        if "surrogate_kind" in values:
            values["surrogate_kind"] = SurrogateKind(values["surrogate_kind"])
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(str(exc))
    if "ranges" in values:
        values["ranges"] = ParameterRanges.from_dict(values["ranges"])
    if "sim" in values:
        values["sim"] = _sim_from_dict(values["sim"], cfg.sim)
    return replace(cfg, **values)


def load_config(path, base: CalibrationConfig = None) -> CalibrationConfig:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid("%s: %s" % (path, exc))
    if not isinstance(data, dict):
        raise ConfigInvalid("%s: expected a JSON object" % path)
    cfg = config_from_dict(data, base)
    logger.debug("loaded config from %s", path)
    return cfg
