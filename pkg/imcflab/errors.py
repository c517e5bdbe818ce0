from typing import Any, Dict, Optional


class ImcfLabError(Exception):
    """Base class for every failure raised by the lab services."""

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "message": self.message,
            "context": {k: _plain(v) for k, v in self.context.items()},
        }


def _plain(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    try:
        return float(value)
    except (TypeError, ValueError):
        return str(value)


class MetricError(ImcfLabError):
    pass


class DomainError(MetricError):

    def __init__(self, s: float, s_min: float, s_max: float):
        super().__init__(
            f"coordinate {s!r} outside metric domain [{s_min!r}, {s_max!r}]",
            s=s, s_min=s_min, s_max=s_max)


class DerivativeNoiseError(MetricError):
    pass


class AsymptoticFlatnessError(ImcfLabError):
    pass


class AdmMassError(ImcfLabError):
    pass


class FlowError(ImcfLabError):
    pass


class FlowUndefinedError(FlowError):

    def __init__(self, s: float, mean_curvature: float):
        super().__init__(
            f"negative mean curvature {mean_curvature!r} at s={s!r}; inverse mean curvature flow undefined",
            s=s, mean_curvature=mean_curvature)


class SolverError(ImcfLabError):
    pass


class SingularLinearizationError(SolverError):

    def __init__(self, index: int, s: Optional[float] = None):
        super().__init__(
            f"singular Newton linearization at grid point {index}",
            index=index, s=s)


class OracleError(ImcfLabError):
    pass


class ConfigError(ImcfLabError):

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}", field=field)
        self.field = field
