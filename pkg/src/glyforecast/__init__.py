"""Univariate glucose forecasting with sliding windows and a walk-forward benchmark."""

from .errors import ConfigError, DataError, GlyforecastError, InsufficientDataError
from .evaluation import ExperimentConfig, GridSpec, rmse, run_grid, walk_forward
from .forecasters import ForecasterSpec, Method, fit, predict
from .series import GlucoseReading, UniformSeries, ingest_readings
from .synth import SynthPatientSpec, generate_ar, generate_patient

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "GlyforecastError", "InsufficientDataError",
    "ExperimentConfig", "GridSpec", "rmse", "run_grid", "walk_forward",
    "ForecasterSpec", "Method", "fit", "predict",
    "GlucoseReading", "UniformSeries", "ingest_readings",
    "SynthPatientSpec", "generate_ar", "generate_patient",
]
