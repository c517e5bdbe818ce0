import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from imcflab.models import BoundReport, JumpEvent
from imcflab.services.flow_service import FlowProfile
from imcflab.services.isoperimetry_service import IsoProfile
from imcflab.services.regsolver_service import SolverResult

from .artifact_dal import read_csv, read_json, write_csv, write_json

PROFILE_COLUMNS = ("t", "s", "B", "m", "v", "H")
SOLVER_COLUMNS = ("s", "u")
BOUND_COLUMNS = ("v", "B", "rhs", "classical", "slack", "improvement", "verdict")
ISO_COLUMNS = ("v", "A", "A_ext", "candidate")

SUMMARY_FILE = "summary.json"
ERROR_FILE = "error.json"


def _wants(fmt: str, kind: str) -> bool:
    return fmt == "both" or fmt == kind


def write_profile(run_dir: Path, profile: FlowProfile, fmt: str = "both") -> List[Path]:
    files = []
    if _wants(fmt, "csv"):
        files.append(write_csv(run_dir / "profile.csv", PROFILE_COLUMNS, profile.rows()))
    if _wants(fmt, "json"):
        files.append(write_json(run_dir / "profile.json", {
            "columns": list(PROFILE_COLUMNS),
            "rows": [list(row) for row in profile.rows()],
            "truncated": profile.truncated,
        }))
    files.append(write_json(run_dir / "jumps.json", {"jumps": profile.jumps}))
    return files


def read_profile(run_dir: Path) -> Dict[str, Any]:
    rows = read_csv(run_dir / "profile.csv", numeric=PROFILE_COLUMNS)
    jumps = [JumpEvent(**item) for item in read_json(run_dir / "jumps.json")["jumps"]]
    return {"rows": rows, "jumps": jumps}


def write_solution(run_dir: Path, result: SolverResult, convergence: Dict[str, Any],
                   fmt: str = "both") -> List[Path]:
    files = []
    if _wants(fmt, "csv"):
        files.append(write_csv(run_dir / "solution.csv", SOLVER_COLUMNS, zip(result.s, result.u)))
    if _wants(fmt, "json"):
        files.append(write_json(run_dir / "solution.json", {
            "s": result.s, "u": result.u, "epsilon": result.problem.epsilon,
            "L": result.problem.L, "sL": result.problem.sL,
        }))
    files.append(write_json(run_dir / "convergence.json", convergence))
    return files


def write_bounds(run_dir: Path, reports: Sequence[BoundReport], fmt: str = "both") -> List[Path]:
    files = []
    if _wants(fmt, "csv"):
        files.append(write_csv(run_dir / "bound.csv", BOUND_COLUMNS,
                               ((r.v, r.B, r.rhs, r.classical, r.slack, r.improvement, r.verdict)
                                for r in reports)))
    if _wants(fmt, "json"):
        files.append(write_json(run_dir / "bound.json", {"reports": list(reports)}))
    return files


def write_iso(run_dir: Path, iso: IsoProfile, extra: Optional[Dict[str, Any]] = None,
              fmt: str = "both") -> List[Path]:
    files = []
    if _wants(fmt, "csv"):
        files.append(write_csv(run_dir / "iso.csv", ISO_COLUMNS, iso.rows()))
    if _wants(fmt, "json"):
        document = {"base": iso.base, "s_ext": iso.s_ext,
                    "rows": [list(row) for row in iso.rows()]}
        document.update(extra or {})
        files.append(write_json(run_dir / "iso.json", document))
    return files


def write_report(run_dir: Path, name: str, document: Any) -> Path:
    return write_json(run_dir / f"{name}.json", document)


def write_summary(run_dir: Path, command: str, config: Dict[str, Any],
                  verdicts: Dict[str, bool], files: Iterable[Path],
                  states: Optional[Dict[str, str]] = None,
                  metric: Optional[Dict[str, Any]] = None) -> Path:
    names = sorted(Path(f).name for f in files)
    return write_json(run_dir / SUMMARY_FILE, {
        "command": command,
        "config": config,
        "metric": metric,
        "verdicts": verdicts,
        "states": states or {},
        "passed": all(verdicts.values()),
        "files": names,
    })


def write_error(run_dir: Path, error: Dict[str, Any]) -> Path:
    return write_json(run_dir / ERROR_FILE, error)


def find_summaries(inputs: Sequence[str]) -> List[Path]:
    """summary.json files under each input directory, in sorted order."""
    found = []
    for item in inputs:
        path = Path(item)
        if path.is_file() and path.name == SUMMARY_FILE:
            found.append(path)
        elif path.is_dir():
            found.extend(sorted(path.rglob(SUMMARY_FILE)))
        else:
            logging.warning(f"Report input {item} holds no {SUMMARY_FILE}")
    return sorted(set(found))


def read_summary(path: Path) -> Dict[str, Any]:
    return read_json(path)
