"""Radio-telemetry movement models on discretized landscapes.

Thin Python layer over the C++ core: scenario simulation, forward-backward
and Viterbi inference, EM and stochastic-gradient fitting, and metrics.
"""

from ._telemovr import (
    DomainError,
    EstimationError,
    FeatureDef,
    FeatureSet,
    Grid,
    GridSpec,
    IoError,
    Model,
    ModelParams,
    Scenario,
    SynthSpec,
    Tower,
    bearing_to,
    bessel_ratio,
    complete_loglik,
    fit,
    forward_backward,
    gibbs_sample_path,
    load_scenario,
    location_error,
    log_bessel_i0,
    make_scenario,
    run_cli,
    viterbi,
    weight_distance,
    wrap_angle,
    write_scenario,
)

__all__ = [
    "DomainError",
    "EstimationError",
    "FeatureDef",
    "FeatureSet",
    "Grid",
    "GridSpec",
    "IoError",
    "Model",
    "ModelParams",
    "Scenario",
    "SynthSpec",
    "Tower",
    "bearing_to",
    "bessel_ratio",
    "complete_loglik",
    "fit",
    "forward_backward",
    "gibbs_sample_path",
    "load_scenario",
    "location_error",
    "log_bessel_i0",
    "make_scenario",
    "run_cli",
    "viterbi",
    "weight_distance",
    "wrap_angle",
    "write_scenario",
]
