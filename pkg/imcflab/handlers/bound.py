import logging
from pathlib import Path
from typing import Any, Dict

from config.settings import Settings
from imcflab.dal import run_dal
from imcflab.models import CommandOutcome, RunConfig

from .common import flow_for_volumes, reachable_volumes, resolve_metric


def run_bound(config: RunConfig, services: Dict[str, Any], settings: Settings,
              run_dir: Path) -> CommandOutcome:
    iso_service = services["isoperimetry_service"]
    metric = resolve_metric(config, services)
    profile = flow_for_volumes(config, metric, services, settings)
    reports = iso_service.check_bound(profile, reachable_volumes(config, profile))

    files = run_dal.write_bounds(run_dir, reports, config.format)
    verdicts = {
        "bound": bool(reports) and all(r.verdict == "pass" for r in reports),
        "improvement": bool(reports) and all(r.improvement > 0.0 for r in reports),
    }
    kinds = {r.verdict for r in reports}
    state = "pass" if reports else "fail"
    for worst in ("hypothesis-not-met", "fail"):
        if worst in kinds:
            state = worst
    logging.info(f"bound: {len(reports)} volume(s), verdicts {verdicts}")
    return CommandOutcome(command="bound", verdicts=verdicts, states={"bound": state},
                          metric=metric.to_config(), files=[str(f) for f in files])
