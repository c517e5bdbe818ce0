import logging
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field, ValidationError, computed_field, field_validator
from typing import Optional


class Settings(BaseSettings):
    LOG_LEVEL: str = Field(default="INFO")

    OUTPUT_DIR: str = Field(default="runs", description="Default artifact directory")
    OUTPUT_FORMAT: str = Field(default="both", description="csv, json or both")

    # Geometry
    PRESET_OUTER_RADIUS: float = Field(
        default=1.0e5,
        description="Outer coordinate bound for closed-form presets")
    NECK_OUTER_RADIUS: float = Field(default=50.0)
    TABULATION_SAMPLES: int = Field(default=4096)
    CAP_TRUNCATION_FACTOR: float = Field(
        default=1.0e3,
        description="Glued metrics are truncated at this multiple of lambda")
    QUAD_EPSREL: float = Field(default=1.0e-12)
    QUAD_LIMIT: int = Field(default=200)
    SCALAR_CURVATURE_TOLERANCE: float = Field(default=1.0e-8)
    TABULATED_NOISE_TOLERANCE: float = Field(default=5.0e-2)
    AF_DECAY_SAMPLES: int = Field(default=64)
    AF_DECAY_SLOPE_SLACK: float = Field(default=0.1)
    ADM_RADII: int = Field(default=6)
    ADM_TAIL_TOLERANCE: float = Field(default=1.0e-6)

    # Flow
    HULL_GRID_SIZE: int = Field(default=1 << 15)
    VOLUME_TABLE_SIZE: int = Field(default=8192)
    POINT_AREA_TOLERANCE: float = Field(
        default=1.0e-3,
        description="Largest initial area still treated as a point start")
    DEFAULT_CENTER_S0: float = Field(default=1.0e-3)
    MIN_SEGMENT_SAMPLES: int = Field(default=16)
    MONOTONICITY_TOLERANCE: float = Field(default=1.0e-8)
    METRIC_CACHE_SIZE: int = Field(
        default=8,
        description="Per-service bound on cached hull envelopes and volume tables")

    # Regularized solver
    NEWTON_MAX_ITERATIONS: int = Field(default=200)
    NEWTON_MIN_STEP: float = Field(default=2.0**-30)
    NEWTON_ARMIJO: float = Field(default=1.0e-4)
    RESIDUAL_TOLERANCE: float = Field(default=1.0e-10)
    CORE_FRACTION: float = Field(default=0.5)
    CORE_POINTS: int = Field(default=257)
    DEFAULT_REG_S0: float = Field(default=1.0)

    # Isoperimetry
    ORACLE_GRID_SIZE: int = Field(default=128)
    ORACLE_TOLERANCE: float = Field(default=1.0e-9)
    RIGIDITY_TOLERANCE: float = Field(default=1.0e-6)
    FLATNESS_TOLERANCE: float = Field(default=1.0e-10)
    BOUND_TOLERANCE: float = Field(default=1.0e-8)

    # Sweeps
    SWEEP_WORKERS: int = Field(default=4)
    SWEEP_HASH_LENGTH: int = Field(default=12)

    @field_validator("OUTPUT_FORMAT")
    @classmethod
    def validate_output_format(cls, v: str) -> str:
        v = v.strip().lower()
        if v not in ("csv", "json", "both"):
            raise ValueError("OUTPUT_FORMAT must be one of csv, json, both")
        return v

    @field_validator("HULL_GRID_SIZE", "VOLUME_TABLE_SIZE", "TABULATION_SAMPLES")
    @classmethod
    def validate_grid_sizes(cls, v: int) -> int:
        if v < 64:
            raise ValueError("grid sizes must be at least 64")
        return v

    @computed_field
    @property
    def log_level_value(self) -> int:
        level = logging.getLevelName(self.LOG_LEVEL.upper())
        return level if isinstance(level, int) else logging.INFO

    model_config = SettingsConfigDict(env_file='.env',
                                      env_file_encoding='utf-8',
                                      extra='ignore',
                                      populate_by_name=True)


_settings_instance: Optional[Settings] = None


def get_settings() -> Settings:
    global _settings_instance
    if _settings_instance is None:
        try:
            _settings_instance = Settings()
        except ValidationError as e:
            logging.critical(
                f"Pydantic validation error while loading settings: {e}")

            raise SystemExit(
                f"CRITICAL SETTINGS ERROR: {e}. Please check your .env file and Settings model."
            )

        if _settings_instance.VOLUME_TABLE_SIZE < 1024:
            logging.warning(
                "VOLUME_TABLE_SIZE is below 1024. Oracle areas will lose accuracy at small volumes."
            )
        if _settings_instance.HULL_GRID_SIZE < _settings_instance.TABULATION_SAMPLES:
            logging.warning(
                "HULL_GRID_SIZE is smaller than TABULATION_SAMPLES. Narrow necks may be missed by the envelope scan."
            )
        if _settings_instance.RIGIDITY_TOLERANCE < 1e-8:
            logging.warning(
                "RIGIDITY_TOLERANCE below 1e-8 is under the quadrature noise floor; equality detection may be unreliable."
            )
    return _settings_instance
