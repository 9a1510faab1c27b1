from dataclasses import replace

from abmcalib.abm import TRUE_PARAMETERS
from abmcalib.config import profile
from abmcalib.harness import METHODS, method_label, sanity_check
from abmcalib.sampling import ParameterRanges

if __name__ == "__main__":
    # desk scale, calibrating the first three parameters
    n_params = 3
    base = profile("desk")
    ranges = ParameterRanges.calibrating(n_params, TRUE_PARAMETERS)

    for sampler_kind, surrogate_kind in METHODS:
        cfg = replace(
            base,
            sampler_kind=sampler_kind,
            surrogate_kind=surrogate_kind,
            ranges=ranges,
            master_seed=7,
        )
        report = sanity_check(TRUE_PARAMETERS, cfg)
        print(f"{method_label(sampler_kind, surrogate_kind)}")
        print(f"  best statistic  {report.best_statistic:.6f}")
        print(f"  standardized L2 {report.l2:.4f}")
        print(f"  evaluations     {report.result.evaluations_used} ({report.terminated_by.value})")
        for level, batches in report.bms.items():
            print(f"  BMS {level}%      {batches if batches is not None else 'not reached'}")
