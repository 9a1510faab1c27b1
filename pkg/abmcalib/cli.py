"""Command line interface: ``abmcalib <subcommand> [options]``."""
import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

import pandas as pd

from abmcalib import __version__
from abmcalib.abm import TRUE_PARAMETERS, EpidemicSeries, simulate, validate_params
from abmcalib.config import PROFILES, CalibrationConfig, load_config, profile
from abmcalib.engine import reference_seed, run_calibration, write_run_artifacts
from abmcalib.errors import (
    CalibrationError,
    ConfigInvalid,
    OutOfRange,
    SchemaError,
    UnsupportedDimension,
    WrongArity,
)
from abmcalib.harness import ExperimentSpec, run_experiment_suite, sanity_check
from abmcalib.sampling import ParameterRanges, SamplerKind
from abmcalib.sobol import new_sobol
from abmcalib.surrogate import SurrogateKind

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _config(args: argparse.Namespace) -> CalibrationConfig:
    """Profile, then config file, then command line flags."""
    cfg = profile(args.profile)
    if getattr(args, "config", None):
        cfg = load_config(args.config, cfg)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if getattr(args, "threads", None) is not None:
        cfg = replace(cfg, threads=args.threads)
    return cfg


def _write_json(data: dict, path: str) -> None:
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def cmd_simulate(args: argparse.Namespace) -> None:
    cfg = _config(args)
    params = validate_params(args.params)
    seed = cfg.master_seed
    series = simulate(params, cfg.sim, seed)
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "series.csv")
    series.to_csv(path)
    print("simulated %d steps, %d infected agent-steps -> %s" % (len(series), series.total(), path))


def cmd_calibrate(args: argparse.Namespace) -> None:
    cfg = _config(args)
    cfg.validate()
    if args.reference:
        reference = EpidemicSeries.from_csv(args.reference)
    else:
        theta = args.theta if args.theta else TRUE_PARAMETERS
        reference = simulate(validate_params(theta), cfg.sim, reference_seed(cfg.master_seed))
    if len(reference) != cfg.sim.horizon_steps:
        raise ConfigInvalid(
            "reference has %d steps, the simulation horizon is %d"
            % (len(reference), cfg.sim.horizon_steps)
        )

    result = run_calibration(cfg, reference, progress=args.progress)
    write_run_artifacts(result, cfg, args.out_dir)
    print(
        "%s after %d evaluations: best statistic %.6f at %s"
        % (
            result.terminated_by.value,
            result.evaluations_used,
            result.best_statistic,
            list(result.best_vector),
        )
    )


def cmd_sanity_check(args: argparse.Namespace) -> None:
    cfg = _config(args)
    theta = tuple(args.theta) if args.theta else TRUE_PARAMETERS
    overrides = {}
    if args.sampler:
        overrides["sampler_kind"] = SamplerKind(args.sampler)
    if args.surrogate:
        overrides["surrogate_kind"] = SurrogateKind(args.surrogate)
    if args.n_params is not None:
        if not 1 <= args.n_params <= len(theta):
            raise ConfigInvalid("--n-params must lie in 1..%d" % len(theta))
        overrides["ranges"] = ParameterRanges.calibrating(args.n_params, theta, cfg.ranges.bounds)
    cfg = replace(cfg, **overrides)

    report = sanity_check(
        theta, cfg, progress=args.progress, independent_seeds=args.independent_seeds
    )
    write_run_artifacts(report.result, report.config, args.out_dir)
    _write_json(report.to_dict(), os.path.join(args.out_dir, "sanity.json"))
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))


def cmd_suite(args: argparse.Namespace) -> None:
    cfg = _config(args)
    if args.spec:
        with open(args.spec) as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as exc:
                raise ConfigInvalid("%s: %s" % (args.spec, exc))
        if not isinstance(data, dict):
            raise ConfigInvalid("%s: expected a JSON object" % args.spec)
        spec = ExperimentSpec.from_dict(data)
    else:
        spec = ExperimentSpec()
    cfg.validate()

    report = run_experiment_suite(spec, cfg, args.out_dir, progress=args.progress)
    _write_json(
        {"version": __version__, "config": cfg.to_dict(), "spec": spec.to_dict()},
        os.path.join(args.out_dir, "manifest.json"),
    )
    print(report.table2.to_string(index=False))
    print(report.table3.to_string(index=False))


def cmd_sobol_dump(args: argparse.Namespace) -> None:
    gen = new_sobol(args.dimension)
    points = gen.take(args.count)
    frame = pd.DataFrame(points, columns=["x%d" % (i + 1) for i in range(args.dimension)])
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "sobol.csv")
    frame.to_csv(path, index=False, float_format="%.17g")
    print("wrote %d points of dimension %d -> %s" % (args.count, args.dimension, path))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abmcalib", description="Calibration of an agent-based epidemic model"
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging level",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p, calibration=True):
        p.add_argument("--profile", default="paper", choices=sorted(PROFILES))
        p.add_argument("--seed", type=int, default=None, help="master seed")
        p.add_argument("--out-dir", default=".", help="output directory")
        if calibration:
            p.add_argument("--config", help="JSON config file, applied over the profile")
            p.add_argument("--threads", type=int, default=None, help="parallel simulations")
            p.add_argument("--progress", action="store_true", help="show a progress bar")

    p = sub.add_parser("simulate", help="simulate one parameter vector to series.csv")
    common(p, calibration=False)
    p.add_argument(
        "--params", type=float, nargs=7, default=list(TRUE_PARAMETERS), metavar="X"
    )
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="calibrate against a reference series")
    common(p)
    p.add_argument("--reference", help="reference series CSV (single 'infected' column)")
    p.add_argument(
        "--theta", type=float, nargs=7, metavar="X",
        help="simulate the reference from this vector instead",
    )
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sanity-check", help="recover a known parameter vector")
    common(p)
    p.add_argument("--theta", type=float, nargs=7, metavar="X")
    p.add_argument("--n-params", type=int, default=None, help="calibrate parameters 1..n")
    p.add_argument("--sampler", choices=[k.value for k in SamplerKind])
    p.add_argument("--surrogate", choices=[k.value for k in SurrogateKind])
    p.add_argument(
        "--independent-seeds",
        action="store_true",
        help="simulate candidates with their own seeds instead of the reference seed",
    )
    p.set_defaults(func=cmd_sanity_check)

    p = sub.add_parser("suite", help="run an experiment suite, write table2.csv and table3.csv")
    common(p)
    p.add_argument("--spec", help="JSON experiment spec")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("sobol-dump", help="write the first points of a Sobol sequence")
    p.add_argument("--dimension", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_sobol_dump)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except (ConfigInvalid, SchemaError, OutOfRange, WrongArity, UnsupportedDimension) as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (CalibrationError, OSError) as exc:
        logger.error("run failed: %s", exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
