"""Particle-filter kernel density estimation."""

from ._pfkde import (
    AscentTrace,
    DensityEstimator,
    GaussianDensity,
    Grid,
    LinearGaussianModel,
    MapReport,
    ParticleCloud,
    Trajectory,
    entropy_estimate,
    fit_loglog,
    gradient_ascent,
    ise,
    k_of_n,
    kalman_filter,
    kalman_step,
    l1_error,
    map_report,
    min_particles,
    particle_argmax,
    run_filter,
    simulate,
    sup_error,
    total_variation,
)

__all__ = [
    "AscentTrace",
    "DensityEstimator",
    "GaussianDensity",
    "Grid",
    "LinearGaussianModel",
    "MapReport",
    "ParticleCloud",
    "Trajectory",
    "entropy_estimate",
    "fit_loglog",
    "gradient_ascent",
    "ise",
    "k_of_n",
    "kalman_filter",
    "kalman_step",
    "l1_error",
    "map_report",
    "min_particles",
    "particle_argmax",
    "run_filter",
    "simulate",
    "sup_error",
    "total_variation",
]
