import logging
from pathlib import Path
from typing import Any, Dict

from config.settings import Settings
from imcflab.dal import run_dal
from imcflab.models import CommandOutcome, RunConfig

from .common import flow_for_volumes, resolve_metric


def run_iso(config: RunConfig, services: Dict[str, Any], settings: Settings,
            run_dir: Path) -> CommandOutcome:
    iso_service = services["isoperimetry_service"]
    metric = resolve_metric(config, services)
    iso = iso_service.build_iso_profile(metric, config.volume_grid())
    monotonicity = iso_service.monotonicity_check(iso)
    profile = flow_for_volumes(config, metric, services, settings)
    chain = iso_service.chain_check(profile, iso)

    files = run_dal.write_iso(run_dir, iso, {"monotonicity": monotonicity, "chain": chain},
                              config.format)
    files.append(run_dal.write_report(run_dir, "iso_checks",
                                      {"monotonicity": monotonicity, "chain": chain}))
    verdicts = {"monotonicity": monotonicity.passed, "chain": chain.passed}
    logging.info(f"iso: {iso.v_grid.size} volume(s), verdicts {verdicts}")
    return CommandOutcome(command="iso", verdicts=verdicts, metric=metric.to_config(),
                          files=[str(f) for f in files])
