"""Stark-chirped rapid adiabatic passage: simulation and optimal control.

Modules
-------
model         pulses, mixing angle, adiabaticity, Bloch generator
dynamics      Bloch and state-costate integration, conservation checks
landscape     (tau, sigma) efficiency/adiabaticity maps, critical points
pmp           Pontryagin pseudo-Hamiltonian, extremals, shooting
inhomogeneity z-dependent perturbations, ensembles, stability maps
geophase      geometric phase and winding numbers of control paths
cli           ``scrap`` command-line runner
"""

__version__ = "0.1.0"

from .dynamics import (IntegrationError, IntegratorConfig, StiffnessError, Trajectory,
                       conservation_report, integrate_bloch, integrate_extremal)
from .fields import ConstantField, FunctionField, GaussianField, SampledField
from .model import (NORTH_POLE, SOUTH_POLE, AdiabaticFrame, ConicalIntersectionError,
                    ControlSample, DegenerateWidthError, PulseParams, ReducedCoords, ScrapError,
                    adiabatic_bloch, adiabatic_energies, adiabaticity, bloch_axis,
                    gaussian_pump, gaussian_stark, mixing_angle, nabc, populations)
from .pmp import (CostFunctional, Extremal, ShootingFailure, ShootingProblem, extremal_rhs,
                  guess_ladder, optimal_fields_energy, optimal_stark_fixed_pump,
                  pseudo_hamiltonian, solve_shooting)

__all__ = [
    "__version__",
    "IntegrationError", "IntegratorConfig", "StiffnessError", "Trajectory",
    "conservation_report", "integrate_bloch", "integrate_extremal",
    "ConstantField", "FunctionField", "GaussianField", "SampledField",
    "NORTH_POLE", "SOUTH_POLE", "AdiabaticFrame", "ConicalIntersectionError", "ControlSample",
    "DegenerateWidthError", "PulseParams", "ReducedCoords", "ScrapError", "adiabatic_bloch",
    "adiabatic_energies", "adiabaticity", "bloch_axis", "gaussian_pump", "gaussian_stark",
    "mixing_angle", "nabc", "populations",
    "CostFunctional", "Extremal", "ShootingFailure", "ShootingProblem", "extremal_rhs",
    "guess_ladder", "optimal_fields_energy", "optimal_stark_fixed_pump", "pseudo_hamiltonian",
    "solve_shooting",
]
