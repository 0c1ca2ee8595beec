"""Layer-thickness optimisation for alternating two-material test masses.

The footprint and the number of layer pairs are treated as fixed
manufacturing constraints. Only the common layer thickness ``d`` is searched,
using golden-section search on ``log d``.

With two or more pairs the objective is bimodal in ``d``: one peak where the
whole stack is about r_C thick and acts as a single slab, and one near
d ~ 3 r_C where the density contrast between layers does the work. A coarse
log-grid scan picks the bracket around the best scan point first, and the
golden-section search then refines inside that bracket.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from .diffusion import DEFAULT_RTOL, eta_hat_csl
from .geometry import Cuboid, Multilayer

__all__ = [
    "StackDesign", "OptimizationResult", "objective", "optimize_thickness",
    "baselines", "enhancement", "OBJECTIVES",
]

OBJECTIVES = ("eta_hat", "eta_hat_per_mass")
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
SCAN_PER_DECADE = 8


@dataclass(frozen=True)
class StackDesign:
    lx: float
    ly: float
    density_a: float
    density_b: float
    d: float
    n_pairs: int

    def __post_init__(self):
        for n in ("lx", "ly", "density_a", "density_b", "d"):
            v = getattr(self, n)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"StackDesign.{n} must be positive and finite, got {v!r}")
        if not isinstance(self.n_pairs, int) or self.n_pairs < 1:
            raise ValueError(f"n_pairs must be an integer >= 1, got {self.n_pairs!r}")
        if self.density_a == self.density_b:
            warnings.warn("equal layer densities: the stack is a homogeneous slab", stacklevel=2)

    @property
    def thickness(self):
        return 2 * self.n_pairs * self.d

    @property
    def total_mass(self):
        return self.lx * self.ly * self.n_pairs * self.d * (self.density_a + self.density_b)

    def distribution(self) -> Multilayer:
        layers = ((self.density_a, self.d), (self.density_b, self.d)) * self.n_pairs
        return Multilayer(self.lx, self.ly, layers)

    def with_thickness(self, d):
        return StackDesign(self.lx, self.ly, self.density_a, self.density_b, d, self.n_pairs)


@dataclass
class OptimizationResult:
    best: StackDesign
    objective_value: float
    kind: str
    r_C: float
    trace: list = field(default_factory=list)   # (d, value) in evaluation order
    converged: bool = True

    def to_dict(self):
        from .exclusion import echo
        return {
            "format": "cslbounds.stack_optimization/1",
            "label": f"stack d*={self.best.d:.4e} m",
            "best": echo(self.best),
            "objective": self.kind,
            "objective_value": self.objective_value,
            "r_C_m": self.r_C,
            "converged": self.converged,
            "trace": [[d, v] for d, v in self.trace],
            "metadata": {"baselines": baselines(self.best, self.r_C)},
        }


def objective(s: StackDesign, r_C, kind="eta_hat_per_mass", *, rtol=DEFAULT_RTOL):
    """eta_hat (m^-2) or eta_hat per kg of the stack at ``r_C``."""
    if kind not in OBJECTIVES:
        raise ValueError(f"unknown objective {kind!r}; expected one of {OBJECTIVES}")
    eh = eta_hat_csl(s.distribution(), r_C, rtol=rtol).eta_hat
    return eh if kind == "eta_hat" else eh / s.total_mass


def baselines(s: StackDesign, r_C, *, rtol=DEFAULT_RTOL):
    """eta_hat(stack) / eta_hat(homogeneous reference) for three references.

    ``same_mass_dense``: the same mass cast as one slab of the denser
    material on the same footprint. This is the enhancement baseline.
    ``same_envelope_mean``: the same outer box at the mean density, which
    also means the same mass.
    ``same_envelope_dense``: the same outer box filled with the denser
    material, so the same volume.
    """
    dense = max(s.density_a, s.density_b)
    area = s.lx * s.ly
    m = s.total_mass
    stack = eta_hat_csl(s.distribution(), r_C, rtol=rtol).eta_hat
    refs = {
        "same_mass_dense": Cuboid(m, s.lx, s.ly, m / (dense * area)),
        "same_envelope_mean": Cuboid(m, s.lx, s.ly, s.thickness),
        "same_envelope_dense": Cuboid(dense * area * s.thickness, s.lx, s.ly, s.thickness),
    }
    return {k: stack / eta_hat_csl(c, r_C, rtol=rtol).eta_hat for k, c in refs.items()}


def enhancement(s: StackDesign, r_C, **kw):
    return baselines(s, r_C, **kw)["same_mass_dense"]


def bracket(f, a, b, max_evals=200):
    """Neighbours of the best point of a coarse scan of ``f`` over [a, b].

    Uses at most a quarter of the evaluation budget.
    """
    n = int(min(max(3, math.ceil(SCAN_PER_DECADE * (b - a) / math.log(10)) + 1), max_evals // 4))
    if n < 3:
        return a, b
    xs = [a + (b - a) * i / (n - 1) for i in range(n)]
    vals = [f(x) for x in xs]
    k = max(range(n), key=vals.__getitem__)
    return xs[max(k - 1, 0)], xs[min(k + 1, n - 1)]


def optimize_thickness(pair, footprint, n_pairs, r_C, d_range, *, kind="eta_hat_per_mass",
                       rel_tol=1e-3, max_evals=200, rtol=DEFAULT_RTOL):
    """Maximise the objective over layer thickness ``d`` in ``d_range``.

    Parameters
    ----------
    pair : (density_a, density_b)
    footprint : (lx, ly)
    d_range : (d_min, d_max)
        Search interval. A degenerate interval returns that design.
    kind : {"eta_hat_per_mass", "eta_hat"}
        With fixed footprint and pair count, plain eta_hat only saturates as
        d grows, so the per-mass objective is the one with an interior
        optimum.
    rel_tol : float
        Stop once ``d_hi / d_lo - 1`` drops below this.
    max_evals : int
        Budget shared by the bracketing scan and the golden-section search.
    """
    d_lo, d_hi = (float(v) for v in d_range)
    if not (math.isfinite(d_lo) and math.isfinite(d_hi) and 0 < d_lo <= d_hi):
        raise ValueError(f"d_range must satisfy 0 < d_min <= d_max, got {d_range!r}")
    proto = StackDesign(footprint[0], footprint[1], pair[0], pair[1], d_lo, int(n_pairs))
    trace = []

    def f(logd):
        d = math.exp(logd)
        v = objective(proto.with_thickness(d), r_C, kind, rtol=rtol)
        trace.append((d, v))
        return v

    if d_lo == d_hi:
        v = f(math.log(d_lo))
        return OptimizationResult(proto, v, kind, r_C, trace, True)

    a, b = bracket(f, math.log(d_lo), math.log(d_hi), max_evals)
    c = b - _INV_PHI * (b - a)
    e = a + _INV_PHI * (b - a)
    fc, fe = f(c), f(e)
    converged = False
    while len(trace) < max_evals:
        if b - a < math.log1p(rel_tol):
            converged = True
            break
        if fc >= fe:
            b, e, fe = e, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + _INV_PHI * (b - a)
            fe = f(e)
    if not converged and b - a < math.log1p(rel_tol):
        converged = True
    d_best, v_best = max(trace, key=lambda t: t[1])
    return OptimizationResult(proto.with_thickness(d_best), v_best, kind, r_C, trace, converged)
