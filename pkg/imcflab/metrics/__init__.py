from .base import FOUR_PI, RadialMetric
from .glued import GluedMetric
from .presets import (CoredSchwarzschildMetric, EuclideanMetric, PRESET_ALIASES,
                      SchwarzschildMetric, SphereCapMetric, make_preset, preset_names)
from .tabulated import TabulatedMetric
from .volume import VolumeTable, radial_grid

__all__ = [
    "FOUR_PI",
    "RadialMetric",
    "GluedMetric",
    "CoredSchwarzschildMetric",
    "EuclideanMetric",
    "SchwarzschildMetric",
    "SphereCapMetric",
    "PRESET_ALIASES",
    "make_preset",
    "preset_names",
    "TabulatedMetric",
    "VolumeTable",
    "radial_grid",
]
