import argparse
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError

from config.settings import Settings
from imcflab.errors import ConfigError
from imcflab.metrics import preset_names
from imcflab.models import RunConfig

METRIC_FLAGS = ("m", "b", "lambda")
RUN_LIST_FLAGS = {"eps": "epsilon", "L": "L", "n": "n"}


def _common_parser(settings: Settings) -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run document; flags override its values")
    common.add_argument("--out", dest="output",
                        help=f"output directory (default {settings.OUTPUT_DIR})")
    common.add_argument("--format", choices=("csv", "json", "both"),
                        help=f"artifact format (default {settings.OUTPUT_FORMAT})")
    common.add_argument("--seedless", action="store_true", default=None,
                        help="every computation is deterministic; reserved")
    common.add_argument("--tol", type=float, help="override the check tolerance")
    return common


def _metric_parser() -> argparse.ArgumentParser:
    metric = argparse.ArgumentParser(add_help=False)
    metric.add_argument("--metric",
                        help=f"preset name ({', '.join(preset_names())}), inline JSON or a JSON file")
    metric.add_argument("--m", help="mass parameter (comma list when sweeping)")
    metric.add_argument("--b", help="core radius of cored-schwarzschild")
    metric.add_argument("--lambda", dest="lambda_", help="cap scale of round-3-sphere-cap")
    metric.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                        help="any other preset parameter; repeatable")
    return metric


def _volume_parser() -> argparse.ArgumentParser:
    volumes = argparse.ArgumentParser(add_help=False)
    volumes.add_argument("--s0", type=float, help="start coordinate of the flow")
    volumes.add_argument("--t-max", dest="t_max", type=float, help="flow time horizon (default 12)")
    volumes.add_argument("--samples", type=int, help="flow samples (default 512)")
    volumes.add_argument("--v-min", dest="v_min", type=float, help="smallest volume (default 0.1)")
    volumes.add_argument("--v-max", dest="v_max", type=float, help="largest volume (default 100)")
    volumes.add_argument("--v-count", dest="v_count", type=int,
                         help="geometric volume samples (default 32)")
    return volumes


def _solver_parser() -> argparse.ArgumentParser:
    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--eps", help="epsilon schedule, comma separated (default 0.1,0.01,0.001)")
    solver.add_argument("--L", help="L schedule, comma separated (default 12)")
    solver.add_argument("--n", help="grid sizes, comma separated (default 1024,2048,4096)")
    solver.add_argument("--refine", action="store_true", default=None,
                        help="add a nested grid-refinement study of the first stage")
    return solver


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imcflab",
        description="Weak inverse mean curvature flow and isoperimetry in radial 3-manifolds")
    sub = parser.add_subparsers(dest="command", required=True)
    common, metric = _common_parser(settings), _metric_parser()
    volumes, solver = _volume_parser(), _solver_parser()

    sub.add_parser("flow", parents=[common, metric, volumes],
                   help="exact weak flow of centered spheres")
    sub.add_parser("solve-reg", parents=[common, metric, volumes, solver],
                   help="regularized solves over an epsilon schedule")
    sub.add_parser("bound", parents=[common, metric, volumes],
                   help="mass-corrected isoperimetric bound along the flow")
    sub.add_parser("iso", parents=[common, metric, volumes],
                   help="isoperimetric profile of centered candidates")
    sub.add_parser("rigidity", parents=[common, metric, volumes],
                   help="equality probe against the Euclidean profile")
    sweep = sub.add_parser("sweep", parents=[common, metric, volumes, solver],
                           help="independent runs over a parameter grid")
    sweep.add_argument("--task", choices=("flow", "solve-reg", "bound"),
                       help="command run at every grid point (default solve-reg)")
    report = sub.add_parser("report", parents=[common],
                            help="aggregate earlier run summaries")
    report.add_argument("--inputs", nargs="*", help="run directories to aggregate")
    return parser


def _numbers(field: str, text: str, kind=float) -> List[Any]:
    try:
        return [kind(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise ConfigError(field, f"expected a comma separated list of numbers, got {text!r}")


def _load_metric(text: str) -> Dict[str, Any]:
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            return json.loads(stripped)
        except json.JSONDecodeError as e:
            raise ConfigError("metric", f"malformed inline JSON ({e.msg})")
    path = Path(stripped)
    if path.suffix == ".json" or path.is_file():
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError("metric", f"cannot read metric document {path}: {e}")
    return {"preset": stripped}


def _metric_params(args: argparse.Namespace) -> Dict[str, List[float]]:
    params: Dict[str, List[float]] = {}
    for flag in METRIC_FLAGS:
        value = getattr(args, "lambda_" if flag == "lambda" else flag, None)
        if value is not None:
            params[flag] = _numbers(flag, value)
    for item in args.param:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError("param", f"expected KEY=VALUE, got {item!r}")
        params[key.strip()] = _numbers(key.strip(), value)
    return params


def _format_validation_error(error: ValidationError) -> ConfigError:
    first = error.errors()[0]
    field = ".".join(str(part) for part in first["loc"]) or "config"
    return ConfigError(field, first["msg"])


def parse_config(text: str) -> RunConfig:
    """Validate a UTF-8 JSON run document."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"malformed JSON document ({e.msg})")
    return validate_document(document)


def validate_document(document: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(document)
    except ValidationError as e:
        raise _format_validation_error(e)


def parse_args(argv: Optional[Sequence[str]], settings: Settings) -> RunConfig:
    """Merge an optional --config document with command-line flags."""
    args = build_parser(settings).parse_args(argv)
    document: Dict[str, Any] = {"output": settings.OUTPUT_DIR, "format": settings.OUTPUT_FORMAT}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError("config", f"cannot read run document {args.config}: {e}")
        if not isinstance(loaded, dict):
            raise ConfigError("config", "run document must be a JSON object")
        document.update(loaded)
    document["command"] = args.command
    sweeping = args.command == "sweep"

    for key in ("output", "format", "seedless", "tol", "s0", "t_max", "samples",
                "v_min", "v_max", "v_count", "refine", "task", "inputs"):
        value = getattr(args, key, None)
        if value is not None:
            document[key] = value

    sweep: Dict[str, List[float]] = dict(document.get("sweep") or {})
    if getattr(args, "metric", None) is not None:
        document["metric"] = _load_metric(args.metric)
    params = _metric_params(args) if hasattr(args, "param") else {}
    if params:
        if not isinstance(document.get("metric"), dict):
            raise ConfigError("metric", "preset parameters need a --metric")
        merged = dict(document["metric"].get("params") or {})
        for key, values in params.items():
            if len(values) == 1:
                merged[key] = values[0]
            elif sweeping:
                sweep[key] = values
                merged.pop(key, None)
            else:
                raise ConfigError(key, "lists of values are only accepted by sweep")
        document["metric"]["params"] = merged

    for flag, field in RUN_LIST_FLAGS.items():
        text = getattr(args, flag, None)
        if text is None:
            continue
        values = _numbers(field, text, int if field == "n" else float)
        if sweeping and len(values) > 1:
            sweep[field] = values
        else:
            document[field] = values
    if sweep:
        document["sweep"] = sweep
    return validate_document(document)
