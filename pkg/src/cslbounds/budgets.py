"""Measurable budgets: force-noise PSD, bulk heating and per-atom heating.

All heating rates assume white collapse noise. For solids the rate is an
effective ``lambda_eff``, an average over phonon frequencies, and outputs
are labelled that way. No frequency mapping is modelled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import PhysicalConstants, constants

__all__ = [
    "ResonatorSpec", "CalorimeterSpec", "CloudSpec", "NoiseBudget",
    "force_noise_psd", "thermal_force_psd", "heating_power",
    "heating_power_from_diffusion", "cloud_energy_rate",
    "cloud_rate_per_nucleon", "cloud_temperature_drift",
]


def _require_positive(obj, *names):
    for n in names:
        v = getattr(obj, n)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ValueError(f"{type(obj).__name__}.{n} must be positive and finite, got {v!r}")


@dataclass(frozen=True)
class ResonatorSpec:
    mass: float    # kg
    omega: float   # rad/s
    Q: float
    T: float       # K

    def __post_init__(self):
        _require_positive(self, "mass", "omega", "Q", "T")
        if self.Q < 1:
            raise ValueError(f"ResonatorSpec.Q must be >= 1, got {self.Q!r}")

    @property
    def gamma(self) -> float:
        """Energy damping rate omega/Q (1/s)."""
        return self.omega / self.Q


@dataclass(frozen=True)
class CalorimeterSpec:
    mass: float               # kg
    heat_leak_ceiling: float  # W/kg

    def __post_init__(self):
        _require_positive(self, "mass", "heat_leak_ceiling")


@dataclass(frozen=True)
class CloudSpec:
    atom_mass: float            # kg
    nucleons_per_atom: int
    energy_rate_ceiling: float  # W per atom

    def __post_init__(self):
        _require_positive(self, "atom_mass", "energy_rate_ceiling")
        if not isinstance(self.nucleons_per_atom, int) or self.nucleons_per_atom < 1:
            raise ValueError(f"nucleons_per_atom must be an integer >= 1, got {self.nucleons_per_atom!r}")


@dataclass(frozen=True)
class NoiseBudget:
    thermal: float    # N^2/Hz
    collapse: float   # N^2/Hz

    @property
    def total(self) -> float:
        return self.thermal + self.collapse


def thermal_force_psd(r: ResonatorSpec, *, const: PhysicalConstants | None = None) -> float:
    c = const or constants()
    return 4.0 * c.k_B * r.T * r.mass * r.omega / r.Q


def force_noise_psd(r: ResonatorSpec, eta: float, *, const: PhysicalConstants | None = None) -> NoiseBudget:
    """One-sided force PSD ``4 k_B T m omega / Q + 2 hbar^2 eta``.

    ``eta`` is the collapse diffusion constant in m^-2 s^-1 (not reduced).
    """
    if not (math.isfinite(eta) and eta >= 0):
        raise ValueError(f"eta must be finite and non-negative, got {eta!r}")
    c = const or constants()
    return NoiseBudget(thermal=thermal_force_psd(r, const=c), collapse=2.0 * c.hbar**2 * eta)


def _check_rate(lam, r_C):
    if not (math.isfinite(lam) and lam >= 0):
        raise ValueError(f"lambda must be finite and non-negative, got {lam!r}")
    if not (math.isfinite(r_C) and r_C > 0):
        raise ValueError(f"r_C must be positive and finite, got {r_C!r}")


def _adler_rate(mass, lam, r_C, c):
    return 0.75 * lam * c.hbar**2 * mass / (r_C**2 * c.m_nucleon**2)


def heating_power(c: CalorimeterSpec, lam: float, r_C: float, *,
                  const: PhysicalConstants | None = None) -> float:
    """Bulk heating ``(3/4) lambda hbar^2 M / (r_C^2 m_N^2)`` in W."""
    _check_rate(lam, r_C)
    return _adler_rate(c.mass, lam, r_C, const or constants())


def heating_power_from_diffusion(mass: float, eta: float, *,
                                 const: PhysicalConstants | None = None) -> float:
    """Kinetic heating ``(3/2) hbar^2 eta / m`` of a free point mass.

    Three independent axes each gain ``hbar^2 eta / (2 m)`` per second.
    """
    c = const or constants()
    return 1.5 * c.hbar**2 * eta / mass


def cloud_energy_rate(c: CloudSpec, lam: float, r_C: float, *,
                      const: PhysicalConstants | None = None) -> float:
    """Energy gain per atom (W). Atoms are taken as point-like against r_C."""
    _check_rate(lam, r_C)
    return _adler_rate(c.atom_mass, lam, r_C, const or constants())


def cloud_rate_per_nucleon(c: CloudSpec, lam: float, r_C: float, **kw) -> float:
    return cloud_energy_rate(c, lam, r_C, **kw) / c.nucleons_per_atom


def cloud_temperature_drift(c: CloudSpec, lam: float, r_C: float, *,
                            const: PhysicalConstants | None = None) -> float:
    """Kinetic temperature drift dT/dt = (2/3) (dE/dt) / k_B, in K/s."""
    k = const or constants()
    return 2.0 / 3.0 * cloud_energy_rate(c, lam, r_C, const=k) / k.k_B
