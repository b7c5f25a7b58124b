"""Multi-person FMCW radar micro-Doppler activity pipeline."""

from .params import ConfigError, DataError, RadarParams
from .scene import (
    ActivityClass,
    GroundTruthEvent,
    PersonMotion,
    RawDataCube,
    ScattererTrack,
    activity_profile,
    synthesize_cube,
)

__version__ = "0.1.0"

__all__ = [
    "ActivityClass",
    "ConfigError",
    "DataError",
    "GroundTruthEvent",
    "PersonMotion",
    "RadarParams",
    "RawDataCube",
    "ScattererTrack",
    "activity_profile",
    "synthesize_cube",
]
