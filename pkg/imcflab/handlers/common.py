import logging
import math
from pathlib import Path
from typing import Any, Dict, List

from config.settings import Settings
from imcflab.metrics import RadialMetric
from imcflab.dal import run_dal
from imcflab.models import CommandOutcome, RunConfig
from imcflab.services.flow_service import FlowProfile


def resolve_metric(config: RunConfig, services: Dict[str, Any]) -> RadialMetric:
    return services["geometry_service"].metric_from_config(config.metric)


def flow_start(config: RunConfig, metric: RadialMetric, settings: Settings) -> float:
    """Start coordinate of the flow: a small sphere at a center, the inner
    boundary otherwise."""
    if config.s0 is not None:
        return config.s0
    return settings.DEFAULT_CENTER_S0 if metric.has_center else metric.s_min


def regularization_start(config: RunConfig, metric: RadialMetric, settings: Settings) -> float:
    if config.s0 is not None:
        return config.s0
    if metric.has_center:
        return settings.DEFAULT_REG_S0
    return metric.s_min + settings.DEFAULT_REG_S0


def flow_for_volumes(config: RunConfig, metric: RadialMetric, services: Dict[str, Any],
                     settings: Settings) -> FlowProfile:
    """Exact flow long enough to sweep past the largest requested volume."""
    flow_service = services["flow_service"]
    s0 = flow_start(config, metric, settings)
    table = services["geometry_service"].volume_table(metric, s0)
    t_max = config.t_max
    if config.v_max < table.total:
        s_top = table.coordinate(config.v_max)
        area0 = float(metric.area(s0))
        t_needed = math.log(float(metric.area(s_top)) / area0) + 1.0
        t_max = max(t_max, t_needed)
    else:
        t_max = max(t_max, 1e3)
    return flow_service.exact_flow(metric, s0, t_max, config.samples)


def reachable_volumes(config: RunConfig, profile: FlowProfile) -> List[float]:
    volumes = config.volume_grid()
    kept = [v for v in volumes if v <= profile.v_max]
    if len(kept) < len(volumes):
        logging.warning(f"{len(volumes) - len(kept)} volume(s) beyond the flow's reach "
                        f"(v_max={profile.v_max:.6g}) were dropped")
    return kept


def run_directory(config: RunConfig) -> Path:
    path = Path(config.output)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_outcome(run_dir: Path, config: RunConfig, outcome: CommandOutcome) -> Path:
    return run_dal.write_summary(run_dir, config.command, config.public_dump(), outcome.verdicts,
                                 outcome.files, states=outcome.states, metric=outcome.metric)
