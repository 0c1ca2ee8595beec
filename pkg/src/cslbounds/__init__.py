"""Collapse-model (CSL and Diosi-Penrose) diffusion constants, noise and
heating budgets, and exclusion curves for mechanical, calorimetric and
cold-atom experiments."""
from .budgets import (CalorimeterSpec, CloudSpec, NoiseBudget, ResonatorSpec, cloud_energy_rate,
                      force_noise_psd, heating_power, thermal_force_psd)
from .constants import PhysicalConstants, constants
from .diffusion import DPParams, ReducedDiffusion, eta_dp, eta_hat_csl, eta_hat_grid
from .exclusion import (CalorimeterExperiment, CloudExperiment, ExclusionCurve, MechanicalExperiment,
                        envelope, exclusion_curve, lambda_upper)
from .geometry import Cuboid, Cylinder, Multilayer, Point, Sphere, Union, form_factor
from .quadrature import QuadratureError
from .simulator import SimConfig, SimulationError, simulate
from .stack_opt import StackDesign, optimize_thickness

__version__ = "0.1.0"
