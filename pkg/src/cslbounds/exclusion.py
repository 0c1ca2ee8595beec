"""Exclusion curves lambda_upper(r_C) from null experimental results.

Every observable is linear in lambda, so each bound is an algebraic
inversion with no root finding:

* mechanical   ceiling / (2 hbar^2 eta_hat)
* calorimeter  (4/3) P r_C^2 m_N^2 / hbar^2        (P per kg)
* cloud        (4/3) P r_C^2 m_N^2 / (hbar^2 m_atom)  (P per atom)
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .budgets import CalorimeterSpec, CloudSpec, ResonatorSpec
from .constants import PhysicalConstants, constants
from .diffusion import DEFAULT_RTOL, eta_hat_csl
from .quadrature import QuadratureError

__all__ = [
    "MechanicalExperiment", "CalorimeterExperiment", "CloudExperiment",
    "ExclusionCurve", "ExclusionError", "NO_CONSTRAINT",
    "lambda_upper", "exclusion_curve", "envelope", "default_grid", "echo",
    "CURVE_FORMAT", "CSV_HEADER",
]

CURVE_FORMAT = "cslbounds.exclusion_curve/1"
CSV_HEADER = ("r_C_m", "lambda_upper_Hz")

#: Returned by :func:`lambda_upper` when the experiment cannot constrain lambda.
NO_CONSTRAINT = None


class ExclusionError(ValueError):
    pass


def echo(obj):
    """JSON-ready description of a spec or distribution, tagged by type."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {"type": type(obj).__name__}
        for f in dataclasses.fields(obj):
            out[f.name] = echo(getattr(obj, f.name))
        return out
    if isinstance(obj, (list, tuple)):
        return [echo(x) for x in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


@dataclass(frozen=True)
class MechanicalExperiment:
    resonator: ResonatorSpec
    distribution: object
    excess_psd_ceiling: float   # N^2/Hz
    label: str = "mechanical"
    kind = "mechanical"
    rate = "lambda (white noise, sampled at the resonator frequency)"

    def __post_init__(self):
        if not (math.isfinite(self.excess_psd_ceiling) and self.excess_psd_ceiling > 0):
            raise ValueError(f"excess_psd_ceiling must be positive, got {self.excess_psd_ceiling!r}")
        m = geo.total_mass(self.distribution)
        if not math.isclose(m, self.resonator.mass, rel_tol=1e-6):
            raise ValueError(f"test-mass distribution weighs {m:.6e} kg but the resonator mode "
                             f"mass is {self.resonator.mass:.6e} kg")


@dataclass(frozen=True)
class CalorimeterExperiment:
    calorimeter: CalorimeterSpec
    label: str = "calorimeter"
    kind = "calorimeter"
    rate = "lambda_eff (white-noise heating; phonon-frequency average not modelled)"


@dataclass(frozen=True)
class CloudExperiment:
    cloud: CloudSpec
    label: str = "cloud"
    kind = "cloud"
    rate = "lambda_eff (white-noise heating; no spectral correction applied)"


def lambda_upper(spec, r_C, *, rtol=DEFAULT_RTOL, const: PhysicalConstants | None = None):
    """Largest collapse rate (Hz) compatible with the experiment at ``r_C``.

    Returns :data:`NO_CONSTRAINT` (None) if the experiment is blind to
    collapse noise at this ``r_C``.
    """
    if not (math.isfinite(r_C) and r_C > 0):
        raise ValueError(f"r_C must be positive and finite, got {r_C!r}")
    c = const or constants()
    if isinstance(spec, MechanicalExperiment):
        eh = eta_hat_csl(spec.distribution, r_C, rtol=rtol, const=c).eta_hat
        if eh <= 0.0:
            return NO_CONSTRAINT
        return spec.excess_psd_ceiling / (2.0 * c.hbar**2 * eh)
    if isinstance(spec, CalorimeterExperiment):
        p = spec.calorimeter.heat_leak_ceiling
        return 4.0 / 3.0 * p * r_C**2 * c.m_nucleon**2 / c.hbar**2
    if isinstance(spec, CloudExperiment):
        cl = spec.cloud
        return 4.0 / 3.0 * cl.energy_rate_ceiling * r_C**2 * c.m_nucleon**2 / (c.hbar**2 * cl.atom_mass)
    raise TypeError(f"unsupported experiment type {type(spec).__name__}")


def default_grid(r_min=1e-9, r_max=1e-4, points=61):
    return np.logspace(math.log10(r_min), math.log10(r_max), int(points))


@dataclass
class ExclusionCurve:
    r_C: np.ndarray
    lambda_upper: np.ndarray
    label: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r_C = np.asarray(self.r_C, dtype=float)
        self.lambda_upper = np.asarray(self.lambda_upper, dtype=float)
        if self.r_C.ndim != 1 or self.r_C.size == 0 or self.r_C.shape != self.lambda_upper.shape:
            raise ExclusionError("curve needs matching non-empty 1D r_C and lambda arrays")
        if np.any(np.diff(self.r_C) <= 0) or np.any(self.r_C <= 0):
            raise ExclusionError("r_C grid must be positive and strictly increasing")
        if not np.all(np.isfinite(self.lambda_upper)) or np.any(self.lambda_upper <= 0):
            raise ExclusionError("lambda_upper must be positive and finite at every grid point")

    @property
    def points(self):
        return list(zip(self.r_C.tolist(), self.lambda_upper.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r, lam in self.points:
            w.writerow([repr(r), repr(lam)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "format": CURVE_FORMAT,
            "label": self.label,
            "r_C_m": self.r_C.tolist(),
            "lambda_upper_Hz": self.lambda_upper.tolist(),
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data):
        if data.get("format") != CURVE_FORMAT:
            raise ExclusionError(f"not an exclusion curve document (format={data.get('format')!r})")
        return cls(data["r_C_m"], data["lambda_upper_Hz"], data["label"], data.get("metadata", {}))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def exclusion_curve(spec, grid=None, *, rtol=DEFAULT_RTOL, workers=None,
                    const: PhysicalConstants | None = None) -> ExclusionCurve:
    """Sweep :func:`lambda_upper` over a strictly increasing ``r_C`` grid."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ExclusionError("r_C grid is empty")
    if np.any(~np.isfinite(grid)) or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ExclusionError("r_C grid must be finite, positive and strictly increasing")

    def one(r):
        try:
            lam = lambda_upper(spec, float(r), rtol=rtol, const=const)
        except QuadratureError as exc:
            raise ExclusionError(f"quadrature failed at r_C={r:.6e} m: {exc}") from exc
        if lam is NO_CONSTRAINT:
            raise ExclusionError(f"no constraint at r_C={r:.6e} m")
        return lam

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            lam = list(pool.map(one, grid))
    else:
        lam = [one(r) for r in grid]
    meta = {
        "kind": spec.kind,
        "rate": spec.rate,
        "spec": echo(spec),
        "tolerances": {"quad_rtol": rtol},
        "constants": echo(const or constants()),
    }
    return ExclusionCurve(grid, np.array(lam), spec.label, meta)


def _winners(c: ExclusionCurve):
    w = c.metadata.get("winner")
    return list(w) if w is not None else [c.label] * c.r_C.size


def _members(c):
    if c.metadata.get("kind") == "envelope":
        return c.metadata["members"]
    return [c.label]


def envelope(curves) -> ExclusionCurve:
    """Pointwise strongest bound of curves sharing one grid.

    ``metadata["winner"]`` names the curve that sets each point. Ties go to
    the alphabetically first label, so the result does not depend on the
    input order.
    """
    curves = list(curves)
    if not curves:
        raise ExclusionError("envelope of no curves")
    grid = curves[0].r_C
    for c in curves[1:]:
        if c.r_C.shape != grid.shape or not np.array_equal(c.r_C, grid):
            raise ExclusionError(f"curve {c.label!r} is on a different r_C grid")
    if len(curves) == 1:
        return curves[0]
    lam = np.vstack([c.lambda_upper for c in curves])
    names = [_winners(c) for c in curves]
    best = lam.min(axis=0)
    winner = []
    for j in range(grid.size):
        winner.append(min(names[i][j] for i in range(len(curves)) if lam[i, j] == best[j]))
    labels = sorted({n for c in curves for n in _members(c)})
    meta = {"kind": "envelope", "members": labels, "winner": winner}
    return ExclusionCurve(grid.copy(), best, "envelope(" + ", ".join(labels) + ")", meta)
