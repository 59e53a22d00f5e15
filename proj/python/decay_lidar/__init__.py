"""Decay-rate lidar sensor model: mapping, likelihoods, baselines and benchmarks."""

import json

from ._core import (
    ConfigError,
    DecayGrid,
    FormatError,
    GridGeometry,
    IoError,
    Pose,
    ReadingKind,
    Scan,
    SensorModel,
    accumulate,
    build_decay_map,
    decay_model,
    endpoint_model,
    load_model,
    read_scans,
    reflection_model,
    sample_ray,
    simulate_scenario,
    standard_suite,
    write_scans,
)
from . import _core

__all__ = [
    "ConfigError",
    "DecayGrid",
    "FormatError",
    "GridGeometry",
    "IoError",
    "Pose",
    "ReadingKind",
    "Scan",
    "SensorModel",
    "accumulate",
    "build_decay_map",
    "compare_models",
    "decay_model",
    "endpoint_model",
    "load_model",
    "read_scans",
    "reflection_model",
    "sample_ray",
    "simulate_scenario",
    "standard_suite",
    "write_scans",
]


def compare_models(models, scans, *, seed=1, run_mcl=True, threads=1,
                   sample_count=50, particle_count=300):
    """Forward KL, inverse KL and MCL error per model, keyed by model name."""
    text = _core._compare_models_json(list(models), list(scans), seed, run_mcl,
                                      threads, sample_count, particle_count)
    return json.loads(text)
