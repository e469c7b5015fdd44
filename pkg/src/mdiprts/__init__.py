"""Key rates of decoy-state MDI-QKD over turbulent channels, with
pre-fixed real-time selection of transmittance pairs."""

from .domains import BoundaryDomain, FullDomain, JointDomain, QuadratureSettings, SquareDomain
from .errors import (
    DegenerateDistributionError,
    EmptySelectionError,
    InconsistentObservablesError,
    NoBoundaryError,
    OutOfGridError,
    PrtsError,
)
from .keyrate import (
    GridSpec,
    RateMap,
    key_rate,
    model_integration,
    model_observable,
    model_simplified,
    rate_map,
    rate_point,
)
from .physics import DeviceParams, IntensitySet, Observables, observables
from .thresholds import ThresholdSet, build_joint_domain, find_thresholds
from .turbulence import ChannelParams, JointPdtc

__all__ = [
    "BoundaryDomain",
    "ChannelParams",
    "DegenerateDistributionError",
    "DeviceParams",
    "EmptySelectionError",
    "FullDomain",
    "GridSpec",
    "InconsistentObservablesError",
    "IntensitySet",
    "JointDomain",
    "JointPdtc",
    "NoBoundaryError",
    "Observables",
    "OutOfGridError",
    "PrtsError",
    "QuadratureSettings",
    "RateMap",
    "SquareDomain",
    "ThresholdSet",
    "build_joint_domain",
    "find_thresholds",
    "key_rate",
    "model_integration",
    "model_observable",
    "model_simplified",
    "observables",
    "rate_map",
    "rate_point",
]
