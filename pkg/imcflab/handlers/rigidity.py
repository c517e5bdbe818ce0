from pathlib import Path
from typing import Any, Dict

from config.settings import Settings
from imcflab.dal import run_dal
from imcflab.models import CommandOutcome, RunConfig

from .common import flow_for_volumes, resolve_metric


def run_rigidity(config: RunConfig, services: Dict[str, Any], settings: Settings,
                 run_dir: Path) -> CommandOutcome:
    iso_service = services["isoperimetry_service"]
    metric = resolve_metric(config, services)
    iso = iso_service.build_iso_profile(metric, config.volume_grid())
    profile = flow_for_volumes(config, metric, services, settings)
    report = iso_service.rigidity_probe(metric, profile, iso, config.tol)

    files = [run_dal.write_report(run_dir, "rigidity", report)]
    return CommandOutcome(command="rigidity", verdicts={"consistent": report.consistent},
                          metric=metric.to_config(), files=[str(f) for f in files])
