"""Numerical lab for the stochastic heat equation on the unit torus."""

import json

from ._shelab import (
    SCHEMA_VERSION,
    DomainError,
    NumericalFailure,
    combined_seminorm,
    kernel_convolve,
    lambda_integral,
    lambda_theta,
    set_thread_count,
    solve_fd,
    solve_spectral,
    spatial_seminorm,
    sup_spatial,
    sup_temporal,
    temporal_seminorm,
    thread_count,
    time_window_variance,
    torus_kernel,
)
from . import _shelab

__all__ = [
    "SCHEMA_VERSION",
    "DomainError",
    "NumericalFailure",
    "combined_seminorm",
    "default_config",
    "kernel_convolve",
    "lambda_integral",
    "lambda_theta",
    "run",
    "set_thread_count",
    "solve_fd",
    "solve_spectral",
    "spatial_seminorm",
    "sup_spatial",
    "sup_temporal",
    "temporal_seminorm",
    "thread_count",
    "time_window_variance",
    "torus_kernel",
]


def default_config(subcommand="verify-kernel"):
    """Default experiment config for a subcommand, as a dict."""
    return json.loads(_shelab.default_config(subcommand))


def run(config):
    """Run an experiment from a config dict (or JSON text).

    Returns (record, csv_text) where record is the parsed result JSON.
    """
    text = config if isinstance(config, str) else json.dumps(config)
    record, csv_text = _shelab.run_config(text)
    return json.loads(record), csv_text
