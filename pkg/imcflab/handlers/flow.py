import logging
from pathlib import Path
from typing import Any, Dict

from config.settings import Settings
from imcflab.dal import run_dal
from imcflab.models import CommandOutcome, RunConfig

from .common import flow_start, resolve_metric


def run_flow(config: RunConfig, services: Dict[str, Any], settings: Settings,
             run_dir: Path) -> CommandOutcome:
    flow_service = services["flow_service"]
    metric = resolve_metric(config, services)
    s0 = flow_start(config, metric, settings)
    profile = flow_service.exact_flow(metric, s0, config.t_max, config.samples)

    tol = config.tol or 1e-4
    growth = flow_service.volume_growth_check(profile, tol)
    lipschitz = flow_service.lipschitz_bound_check(profile, tol)
    geroch = flow_service.geroch_check(profile)

    files = run_dal.write_profile(run_dir, profile, config.format)
    files.append(run_dal.write_report(run_dir, "checks", {
        "volume_growth": growth,
        "lipschitz": lipschitz,
        "geroch": geroch,
        "truncated": profile.truncated,
        "jumps": len(profile.jumps),
    }))
    verdicts = {
        "volume_growth": growth.passed,
        "lipschitz": lipschitz.passed,
        "geroch": geroch.passed,
    }
    logging.info(f"flow: {len(profile.jumps)} jump(s), verdicts {verdicts}")
    return CommandOutcome(command="flow", verdicts=verdicts, states={"geroch": geroch.verdict},
                          metric=metric.to_config(), files=[str(f) for f in files])
