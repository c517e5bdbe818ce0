import asyncio
import logging
from typing import Any, Dict

from config.settings import Settings
from imcflab.models import CommandOutcome, RunConfig

from .bound import run_bound
from .common import run_directory, write_outcome
from .flow import run_flow
from .iso import run_iso
from .report import run_report
from .rigidity import run_rigidity
from .solve_reg import run_solve_reg
from .sweep import run_sweep

COMMAND_HANDLERS = {
    "flow": run_flow,
    "solve-reg": run_solve_reg,
    "bound": run_bound,
    "iso": run_iso,
    "rigidity": run_rigidity,
}


async def dispatch(config: RunConfig, settings: Settings,
                   services: Dict[str, Any]) -> CommandOutcome:
    run_dir = run_directory(config)
    if config.command == "sweep":
        outcome = await run_sweep(config, settings, run_dir)
    elif config.command == "report":
        return run_report(config, run_dir)
    else:
        handler = COMMAND_HANDLERS[config.command]
        outcome = await asyncio.to_thread(handler, config, services, settings, run_dir)
    write_outcome(run_dir, config, outcome)
    unmet = sorted(k for k, state in outcome.states.items() if state == "hypothesis-not-met")
    if unmet:
        logging.warning(f"{config.command}: hypothesis not met for {', '.join(unmet)}")
    logging.info(f"{config.command}: {'all verdicts pass' if outcome.passed else 'verdict failure'}")
    return outcome
