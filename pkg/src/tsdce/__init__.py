"""Transformed spatial domain channel estimation for analog mmWave
systems: channel/codebook simulation, the TSDCE estimator, baseline
estimators, analytic bounds and a Monte Carlo bench."""

from .algorithm import PathEstimate, TsdceConfig, reconstruct_channel, run
from .channel import ChannelRealization, PathParams, build_channel, sample_paths
from .numkit import SeededRng
from .observation import (
    Codebook,
    Observation,
    SpatialObservation,
    build_codebook,
    spatial_ls_estimate,
    synthesize_observation,
    to_spatial,
)

__all__ = [
    "ChannelRealization",
    "Codebook",
    "Observation",
    "PathEstimate",
    "PathParams",
    "SeededRng",
    "SpatialObservation",
    "TsdceConfig",
    "build_channel",
    "build_codebook",
    "reconstruct_channel",
    "run",
    "sample_paths",
    "spatial_ls_estimate",
    "synthesize_observation",
    "to_spatial",
]

__version__ = "0.1.0"
