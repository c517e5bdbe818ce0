import asyncio
import hashlib
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Tuple

from config.settings import Settings
from imcflab.dal import run_dal
from imcflab.dal.artifact_dal import dumps
from imcflab.errors import ConfigError, ImcfLabError
from imcflab.models import CommandOutcome, RunConfig

RUN_KEYS = ("epsilon", "L", "n", "s0")


def expand_sweep(config: RunConfig) -> List[Tuple[Dict[str, float], RunConfig]]:
    """Cartesian product of the swept values, one task config per point."""
    keys = sorted(config.sweep)
    if config.metric.preset is None and any(k not in RUN_KEYS for k in keys):
        raise ConfigError("sweep", "metric parameters can only be swept on presets")
    runs = []
    for combo in itertools.product(*(config.sweep[k] for k in keys)):
        point = dict(zip(keys, combo))
        doc = config.model_dump(mode="json")
        doc.update(command=config.task, sweep={})
        if "epsilon" in point:
            # one regularization level per run
            doc.update(epsilon=[point["epsilon"]], L=[config.L[-1]], n=[config.n[-1]])
        if "L" in point:
            doc["L"] = [point["L"]]
        if "n" in point:
            doc["n"] = [int(point["n"])]
        if "s0" in point:
            doc["s0"] = point["s0"]
        params = {k: v for k, v in point.items() if k not in RUN_KEYS}
        if params:
            doc["metric"]["params"] = {**doc["metric"]["params"], **params}
        runs.append((point, RunConfig.model_validate(doc)))
    return runs


def run_key(config: RunConfig, length: int) -> str:
    return hashlib.sha256(dumps(config.public_dump()).encode("utf-8")).hexdigest()[:length]


def _run_point(config: RunConfig, settings: Settings) -> CommandOutcome:
    from imcflab.app.factories.build_services import build_core_services
    from imcflab.handlers import COMMAND_HANDLERS
    from imcflab.handlers.common import write_outcome

    run_dir = Path(config.output)
    run_dir.mkdir(parents=True, exist_ok=True)
    services = build_core_services(settings)
    try:
        outcome = COMMAND_HANDLERS[config.command](config, services, settings, run_dir)
    except ImcfLabError as e:
        logging.error(f"Sweep run {run_dir.name} failed: {e.message}")
        run_dal.write_error(run_dir, e.to_dict())
        return CommandOutcome(command=config.command, verdicts={"completed": False})
    write_outcome(run_dir, config, outcome)
    return outcome


async def run_sweep(config: RunConfig, settings: Settings, run_dir: Path) -> CommandOutcome:
    points = expand_sweep(config)
    keyed = []
    for point, sub in points:
        key = run_key(sub, settings.SWEEP_HASH_LENGTH)
        keyed.append((key, point, sub.model_copy(update={"output": str(run_dir / key)})))
    logging.info(f"Sweep over {sorted(config.sweep)}: {len(keyed)} run(s), "
                 f"{settings.SWEEP_WORKERS} worker(s)")

    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=settings.SWEEP_WORKERS) as pool:
        outcomes = await asyncio.gather(*(
            loop.run_in_executor(pool, _run_point, sub, settings) for _, _, sub in keyed))

    manifest = []
    verdicts: Dict[str, bool] = {}
    for (key, point, _), outcome in zip(keyed, outcomes):
        manifest.append({"run": key, "params": point, "passed": outcome.passed,
                         "verdicts": outcome.verdicts, "states": outcome.states})
        verdicts[key] = outcome.passed
    manifest.sort(key=lambda item: item["run"])
    path = run_dal.write_report(run_dir, "sweep", {"task": config.task, "runs": manifest})
    return CommandOutcome(command="sweep", verdicts=verdicts, files=[str(path)])
