"""Poisson safety functions on occupancy grids and CBF safety filters that use them."""

from .errors import PsafeError
from .filters import FilterParams, filter_r1, filter_r2
from .forcing import ForcingConfig, make_forcing
from .grid import OccupancyGrid, ScalarField, decompose_domain, load_occupancy
from .safety import SafetyFrame, assemble_frame, sample
from .sim import Scenario, run_scenario
from .solver import DirichletProblem, sor_solve

__version__ = "0.1.0"

__all__ = [
    "DirichletProblem", "FilterParams", "ForcingConfig", "OccupancyGrid", "PsafeError", "SafetyFrame",
    "ScalarField", "Scenario", "assemble_frame", "decompose_domain", "filter_r1", "filter_r2", "load_occupancy",
    "make_forcing", "run_scenario", "sample", "sor_solve",
]
