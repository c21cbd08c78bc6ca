"""Pennes bioheat equation on tetrahedral meshes."""

from .assembly import SystemMatrices, assemble, lump
from .solver import (SolverConfig, TemperatureField, direct_steady, march, slowest_relaxation_time,
                     solve_steady, step, temperature_csv)

__all__ = ["SystemMatrices", "assemble", "lump", "SolverConfig", "TemperatureField", "direct_steady",
           "march", "slowest_relaxation_time", "solve_steady", "step", "temperature_csv"]
