import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel


def format_number(value: Any) -> str:
    """17 significant digits; non-finite numbers become an empty cell."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return format(number, ".17g") if math.isfinite(number) else ""
    return str(value)


def plain(value: Any) -> Any:
    """JSON-ready copy: numpy scalars unwrapped, NaN and inf as null."""
    if isinstance(value, BaseModel):
        return plain(value.model_dump())
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else None
    return value


def dumps(document: Any) -> str:
    return json.dumps(plain(document), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: Path, document: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(document), encoding="utf-8")
    return path


def read_json(path: Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(cell) for cell in row])
    return path


def read_csv(path: Path, numeric: Optional[Sequence[str]] = None) -> List[Dict[str, Any]]:
    """Rows as dicts; columns listed in numeric are parsed back to float."""
    numeric = set(numeric or ())
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        rows = list(csv.DictReader(handle))
    for row in rows:
        for key in numeric:
            cell = row.get(key, "")
            row[key] = float(cell) if cell not in ("", None) else math.nan
    return rows
