"""Physical constants (SI, CODATA 2018).

The CSL reference mass ``m_nucleon`` is the neutron mass. Every CSL bound
scales with ``m_nucleon**2``, so swapping in the proton mass shifts bounds
by about 0.28 %.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

__all__ = ["PhysicalConstants", "constants", "with_overrides"]


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34        # J s
    k_B: float = 1.380649e-23            # J/K, exact
    G: float = 6.67430e-11               # m^3 kg^-1 s^-2
    m_nucleon: float = 1.67492749804e-27  # kg, neutron mass
    amu: float = 1.66053906660e-27       # kg

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and v > 0 and v < float("inf")):
                raise ValueError(f"constant {f.name} must be positive and finite, got {v!r}")


_CODATA = PhysicalConstants()


def constants() -> PhysicalConstants:
    """Return the shared immutable constant table."""
    return _CODATA


def with_overrides(**overrides: float) -> PhysicalConstants:
    """Copy of the default table with selected entries replaced."""
    return replace(_CODATA, **overrides)
