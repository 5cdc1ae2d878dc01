"""Spatial epidemic simulation lab.

Particle epidemic processes on a 2-D torus (pairwise infection and crowd
contagion), the matching kinetic transport-reaction solver, SIR/SIRS
reductions, and diagnostics for mixing and propagation of chaos.
"""

__version__ = "0.1.0"

from .core import (
    FractionSeries,
    InitialData,
    Label,
    Particle,
    ParticleState,
    Placement,
    RngStream,
    SimParams,
    beta_from_params,
    init_particles,
    torus_distance,
    torus_wrap,
)

__all__ = [
    "FractionSeries",
    "InitialData",
    "Label",
    "Particle",
    "ParticleState",
    "Placement",
    "RngStream",
    "SimParams",
    "beta_from_params",
    "init_particles",
    "torus_distance",
    "torus_wrap",
    "__version__",
]
