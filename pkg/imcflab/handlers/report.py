import logging
from pathlib import Path
from typing import Any, Dict, List

from imcflab.dal import run_dal
from imcflab.models import CommandOutcome, RunConfig


def run_report(config: RunConfig, run_dir: Path) -> CommandOutcome:
    """Aggregate earlier summary.json files; verdicts are copied, never recomputed."""
    inputs = config.inputs or [config.output]
    runs: List[Dict[str, Any]] = []
    verdicts: Dict[str, bool] = {}
    for path in run_dal.find_summaries(inputs):
        summary = run_dal.read_summary(path)
        name = str(path.parent)
        runs.append({"run": name, "command": summary["command"],
                     "verdicts": summary["verdicts"], "states": summary.get("states", {}),
                     "passed": summary["passed"]})
        for check, value in sorted(summary["verdicts"].items()):
            verdicts[f"{name}:{check}"] = bool(value)
    if not runs:
        logging.warning(f"No run summaries found under {inputs}")
    target = run_dal.write_report(run_dir, "report", {
        "runs": runs,
        "checks": verdicts,
        "passed": bool(runs) and all(verdicts.values()),
    })
    return CommandOutcome(command="report", verdicts=verdicts or {"runs_found": False},
                          files=[str(target)])
