"""Projected Newton solver for quasistatic hyperelasticity with adaptive eigenvalue filtering."""

from .energy import EnergyModel, MaterialParams, lame_from_young_poisson
from .kernels import BACKEND
from .mesh import ScenarioSpec, TetMesh, apply_scenario, generate_beam, load_mesh, precompute_rest
from .newton import SolverConfig, SolveTrace, newton_solve
from .projection import ProjectionStrategy

__all__ = [
    "BACKEND",
    "EnergyModel",
    "MaterialParams",
    "ProjectionStrategy",
    "ScenarioSpec",
    "SolveTrace",
    "SolverConfig",
    "TetMesh",
    "apply_scenario",
    "generate_beam",
    "lame_from_young_poisson",
    "load_mesh",
    "newton_solve",
    "precompute_rest",
]

__version__ = "0.1.0"
