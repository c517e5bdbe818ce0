import logging
from pathlib import Path
from typing import Any, Dict

from config.settings import Settings
from imcflab.dal import run_dal
from imcflab.models import CommandOutcome, RunConfig

from .common import regularization_start, resolve_metric


def run_solve_reg(config: RunConfig, services: Dict[str, Any], settings: Settings,
                  run_dir: Path) -> CommandOutcome:
    solver = services["regsolver_service"]
    metric = resolve_metric(config, services)
    s0 = regularization_start(config, metric, settings)

    convergence, results = solver.run_schedule(metric, s0, config.schedule())
    final = results[-1]
    barrier = solver.subsolution_barrier(final.problem, final)
    document: Dict[str, Any] = {"convergence": convergence, "barrier": barrier}
    verdicts = {
        "converged": all(stage.converged for stage in convergence.stages),
        "convergence": convergence.passed,
        "barrier": barrier.holds,
    }

    if config.refine:
        refinement = solver.refinement_study(results[0].problem)
        document["refinement"] = refinement
        verdicts["refinement"] = refinement.passed

    files = run_dal.write_solution(run_dir, final, document, config.format)
    logging.info(f"solve-reg: {len(results)} stage(s), verdicts {verdicts}")
    return CommandOutcome(command="solve-reg", verdicts=verdicts, metric=metric.to_config(),
                          files=[str(f) for f in files])
