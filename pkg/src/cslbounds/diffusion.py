"""CSL and Diosi-Penrose diffusion constants.

The CSL diffusion constant is linear in the collapse rate, so everything
here computes the reduced constant ``eta_hat = eta / lambda`` (m^-2):

    eta_hat = (4 pi)^(3/2) r_C^3 / m0^2
              * integral d^3k/(2 pi)^3  k_z^2 exp(-k^2 r_C^2) |rho~(k)|^2

With ``u = k r_C`` the weight becomes ``exp(-u^2)`` and the prefactor
collapses to ``1 / (pi^(3/2) m0^2 r_C^2)``. The integral is truncated at
``|u| = U_MAX`` (the discarded weight is below 1e-20).

Integration routes, picked by shape:

``separable``   Cuboid, Multilayer. Product of three 1D integrals.
``radial``      Point, Sphere. 1D integral over |u|.
``axisymmetric`` Cylinder. The azimuth is integrated analytically; what is
                left is a sum of two products of 1D integrals.
``cubature``    Anything, Union in particular. 3D tensor Gauss-Legendre.

Form factors oscillate with period ~ 2 pi r_C / L in u. Past an aspect
ratio of ``KSPACE_MAX_ASPECT`` the 1D separable and radial integrals switch
to the lag domain. That is the same integral, written against the density
autocorrelation, and it has no oscillation. The 3D and axisymmetric
routes have no such form and raise :class:`QuadratureError` when the
budget runs out.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import geometry as geo
from .constants import PhysicalConstants, constants
from .quadrature import DEFAULT_BUDGET, QuadratureError, gauss_kronrod, tensor_cubature

__all__ = [
    "ReducedDiffusion", "DPParams",
    "eta_hat_csl", "eta_hat_grid", "eta_dp", "eta_hat_limit_small",
    "U_MAX", "KSPACE_MAX_ASPECT", "DEFAULT_RTOL",
]

U_MAX = 7.0
KSPACE_MAX_ASPECT = 2000.0
DEFAULT_RTOL = 1e-6
_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class ReducedDiffusion:
    eta_hat: float          # m^-2
    r_C: float              # m
    quad_error: float       # relative
    method: str
    axis: tuple = (0.0, 0.0, 1.0)

    def eta(self, lam: float) -> float:
        """Diffusion constant (m^-2 s^-1) at collapse rate ``lam`` (Hz)."""
        return lam * self.eta_hat


@dataclass(frozen=True)
class DPParams:
    r_DP: float
    a: float
    rho: float | None = None

    def __post_init__(self):
        for name in ("r_DP", "a") + (("rho",) if self.rho is not None else ()):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"DP parameter {name} must be positive and finite, got {v!r}")
        if self.a > 10 * self.r_DP:
            warnings.warn(f"lattice constant a={self.a:g} m exceeds 10 r_DP={self.r_DP:g} m",
                          stacklevel=2)


def _seed_panels(length_over_rc, span):
    # about one panel per oscillation of exp(i u L / r_C) over the span
    return max(4, int(math.ceil(span * length_over_rc / math.pi)) + 1)


# -- separable route ---------------------------------------------------------

@lru_cache(maxsize=4096)
def _sinc2_moment0(ell, domain, rtol, max_evals):
    """integral over R of exp(-u^2) sinc(u ell / 2)^2 du."""
    if domain == "auto":
        domain = "lag" if ell > KSPACE_MAX_ASPECT else "kspace"
    if domain == "kspace":
        def f(u):
            return np.exp(-u * u) * geo.sinc(0.5 * ell * u) ** 2
        r = gauss_kronrod(f, 0.0, U_MAX, rtol=rtol, panels=_seed_panels(ell, U_MAX),
                          max_evals=max_evals)
        return 2.0 * r.value, r.rel_error
    # sinc^2 is the transform of the triangle (ell - |t|)/ell^2
    hi = min(ell, 2.0 * U_MAX)

    def g(t):
        return (ell - t) * np.exp(-0.25 * t * t)
    r = gauss_kronrod(g, 0.0, hi, rtol=rtol, panels=4, max_evals=max_evals)
    return 2.0 * _SQRT_PI * r.value / ell**2, r.rel_error


def _moment2_kspace(axis, r_C, rtol, max_evals):
    ell = axis.length / r_C

    def f(u):
        return u * u * np.exp(-u * u) * axis.power(u / r_C)
    r = gauss_kronrod(f, 0.0, U_MAX, rtol=rtol, panels=_seed_panels(ell, U_MAX),
                      max_evals=max_evals)
    return 2.0 * r.value, r.rel_error


def _moment2_lag(axis, r_C):
    # u^2 |S(u/r_C)|^2 = r_C^2 |sum_j w_j exp(i u z_j / r_C)|^2, Gaussian-averaged
    z, w = axis.jumps()
    dz = (z[:, None] - z[None, :]) / r_C
    return r_C**2 * _SQRT_PI * float(w @ np.exp(-0.25 * dz * dz) @ w), 1e-15


def _separable(axes, r_C, m0, rtol, domain, max_evals):
    fx, fy, fz = axes
    ix, ex = _sinc2_moment0(fx.length / r_C, domain, rtol / 3, max_evals)
    iy, ey = _sinc2_moment0(fy.length / r_C, domain, rtol / 3, max_evals)
    use_lag = domain == "lag" or (domain == "auto" and fz.length / r_C > KSPACE_MAX_ASPECT)
    iz, ez = _moment2_lag(fz, r_C) if use_lag else _moment2_kspace(fz, r_C, rtol / 3, max_evals)
    # fx, fy carry unit scale; fz carries the mass^2 (or area^2) factor
    val = fx.scale * fy.scale * ix * iy * iz / (math.pi**1.5 * m0**2 * r_C**2)
    return val, ex + ey + ez


# -- radial route (isotropic |rho~|) ---------------------------------------------

def _radial(d, r_C, m0, rtol, domain, max_evals):
    if isinstance(d, geo.Point):
        mass, radius = d.mass, 0.0
    else:
        mass, radius = d.mass, d.radius
    x = radius / r_C
    if domain == "auto":
        domain = "lag" if 2 * x > KSPACE_MAX_ASPECT else "kspace"
    if domain == "kspace" or radius == 0.0:
        def f(u):
            return u**4 * np.exp(-u * u) * geo.sphere_factor(u * x) ** 2
        r = gauss_kronrod(f, 0.0, U_MAX, rtol=rtol, panels=_seed_panels(2 * x, U_MAX),
                          max_evals=max_evals)
        return 4.0 / (3.0 * _SQRT_PI) * mass**2 * r.value / (m0**2 * r_C**2), r.rel_error
    # overlap volume of two balls; only |A'(s)| enters after integrating by parts
    hi = min(2.0 * x, 2.0 * U_MAX)

    def g(t):
        return t**3 * (4 * x * x - t * t) * np.exp(-0.25 * t * t)
    r = gauss_kronrod(g, 0.0, hi, rtol=rtol, panels=4, max_evals=max_evals)
    rho = d.density
    return math.pi**2 / 6.0 * rho**2 * r_C**4 * r.value / m0**2, r.rel_error


# -- axisymmetric route ------------------------------------------------------------

def _axisymmetric(d, r_C, m0, rtol, max_evals):
    nz2 = d.axis[2] ** 2
    ell = d.height / r_C
    x = d.radius / r_C
    a0, ea0 = _sinc2_moment0(ell, "kspace", rtol / 4, max_evals)

    def par2(u):
        return u * u * np.exp(-u * u) * geo.sinc(0.5 * ell * u) ** 2
    ra2 = gauss_kronrod(par2, 0.0, U_MAX, rtol=rtol / 4, panels=_seed_panels(ell, U_MAX),
                        max_evals=max_evals)
    a2 = 2.0 * ra2.value
    seeds = _seed_panels(2 * x, U_MAX)

    def perp(power):
        def f(u):
            return u**power * np.exp(-u * u) * geo.airy_factor(u * x) ** 2
        return gauss_kronrod(f, 0.0, U_MAX, rtol=rtol / 4, panels=seeds, max_evals=max_evals)
    b1, b3 = perp(1), perp(3)
    # azimuthal mean of u_z^2 = u_par^2 n_z^2 + u_perp^2 (1 - n_z^2) / 2
    terms = nz2 * a2 * b1.value + 0.5 * (1.0 - nz2) * a0 * b3.value
    integral = 2.0 * math.pi * d.mass**2 * terms
    err = ea0 + ra2.rel_error + b1.rel_error + b3.rel_error
    return integral / (math.pi**1.5 * m0**2 * r_C**2), err


# -- 3D route --------------------------------------------------------------------

def _gaussian_cutoff(rtol):
    """Radius where the u^4 exp(-u^2) tail drops below rtol / 100."""
    u = 4.0
    while u < U_MAX and u**3 * math.exp(-u * u) > 0.01 * rtol:
        u += 0.1
    return min(u, U_MAX)


def _cubature(d, r_C, m0, rtol, max_evals):
    # spherical coordinates: the Gaussian weight is radial and no corners
    # of a Cartesian box get wasted. Hermitian symmetry |rho~(k)| = |rho~(-k)|
    # restricts theta to the upper hemisphere, doubled.
    u_hi = _gaussian_cutoff(rtol)
    # one Kronrod panel per ~6 oscillations of |rho~|^2 along the radius;
    # deliberately coarse so the refinement has a previous grid to compare to
    seed = u_hi * geo.extent(d) / r_C / (12.0 * math.pi)
    box = [(0.0, u_hi), (0.0, 0.5 * math.pi), (0.0, 2.0 * math.pi)]
    panels = [max(2, math.ceil(seed)), max(1, math.ceil(seed)), max(2, math.ceil(2 * seed))]

    def f(u, theta, phi):
        st, ct = np.sin(theta), np.cos(theta)
        k = np.stack(np.broadcast_arrays(u * st * np.cos(phi), u * st * np.sin(phi), u * ct),
                     axis=-1) / r_C
        ff = geo.form_factor(d, k)
        return u**4 * ct * ct * st * np.exp(-u * u) * (ff.real**2 + ff.imag**2)
    r = tensor_cubature(f, box, panels, rtol=rtol, max_evals=max_evals)
    return 2.0 * r.value / (math.pi**1.5 * m0**2 * r_C**2), r.rel_error


_ROUTES = ("separable", "radial", "axisymmetric", "cubature")


def _default_route(d):
    if geo.separable_axes(d) is not None:
        return "separable"
    if isinstance(d, (geo.Point, geo.Sphere)):
        return "radial"
    if isinstance(d, geo.Cylinder):
        return "axisymmetric"
    return "cubature"


def eta_hat_csl(d, r_C, *, method="auto", domain="auto", rtol=DEFAULT_RTOL,
                max_evals=DEFAULT_BUDGET, const: PhysicalConstants | None = None):
    """Reduced CSL diffusion constant of ``d`` along z.

    Parameters
    ----------
    d : MassDistribution
    r_C : float
        Correlation length in m.
    method : {"auto", "separable", "radial", "axisymmetric", "cubature"}
        Integration route; "auto" picks the cheapest exact one for the shape.
    domain : {"auto", "kspace", "lag"}
        For the separable and radial routes, force k-space quadrature or the
        autocorrelation (lag) form. "auto" switches at ``KSPACE_MAX_ASPECT``.
    rtol : float
        Relative error target.

    Returns
    -------
    ReducedDiffusion

    Raises
    ------
    QuadratureError
        If the evaluation budget is exhausted. The exception carries the best
        estimate and its error bound.
    """
    if not (math.isfinite(r_C) and r_C > 0):
        raise ValueError(f"r_C must be positive and finite, got {r_C!r}")
    if domain not in ("auto", "kspace", "lag"):
        raise ValueError(f"unknown domain {domain!r}")
    m0 = (const or constants()).m_nucleon
    route = _default_route(d) if method == "auto" else method
    if route not in _ROUTES:
        raise ValueError(f"unknown method {method!r}")
    if route == "separable":
        axes = geo.separable_axes(d)
        if axes is None:
            raise ValueError(f"{type(d).__name__} is not separable")
        val, err = _separable(axes, r_C, m0, rtol, domain, max_evals)
    elif route == "radial":
        if not isinstance(d, (geo.Point, geo.Sphere)):
            raise ValueError(f"radial route needs an isotropic shape, got {type(d).__name__}")
        val, err = _radial(d, r_C, m0, rtol, domain, max_evals)
    elif route == "axisymmetric":
        if not isinstance(d, geo.Cylinder):
            raise ValueError(f"axisymmetric route needs a Cylinder, got {type(d).__name__}")
        val, err = _axisymmetric(d, r_C, m0, rtol, max_evals)
    else:
        geo.total_mass(d)
        val, err = _cubature(d, r_C, m0, rtol, max_evals)
    return ReducedDiffusion(eta_hat=float(val), r_C=float(r_C), quad_error=float(err), method=route)


def eta_hat_grid(d, r_values, *, workers=None, **kwargs):
    """:func:`eta_hat_csl` over several ``r_C`` values, results in input order."""
    r_values = [float(r) for r in r_values]
    if workers is None or workers <= 1:
        return [eta_hat_csl(d, r, **kwargs) for r in r_values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: eta_hat_csl(d, r, **kwargs), r_values))


def eta_hat_limit_small(d, r_C, *, const: PhysicalConstants | None = None):
    """Point-like limit ``(m/m0)^2 / (2 r_C^2)``, valid for sizes below r_C/10."""
    size = geo.extent(d)
    if size >= 0.1 * r_C:
        raise ValueError(f"size {size:.3e} m is not below r_C/10 = {0.1 * r_C:.3e} m; "
                         "point-like limit does not apply")
    m0 = (const or constants()).m_nucleon
    return (geo.total_mass(d) / m0) ** 2 / (2.0 * r_C**2)


def eta_dp(d, p: DPParams, *, const: PhysicalConstants | None = None):
    """Diosi-Penrose diffusion constant ``G rho m / (6 sqrt(pi) hbar) (a/r_DP)^3``.

    The density comes from ``d`` when it has a single one, otherwise from
    ``p.rho``. If both are present they must agree.
    """
    c = const or constants()
    rho_d = geo.uniform_density(d)
    if isinstance(d, (geo.Union, geo.Multilayer)) and rho_d is None:
        raise ValueError("DP diffusion needs one bulk density; "
                         f"this {type(d).__name__} mixes several")
    if rho_d is not None and p.rho is not None and not math.isclose(rho_d, p.rho, rel_tol=1e-9):
        raise ValueError(f"distribution density {rho_d:g} disagrees with DP rho {p.rho:g}")
    rho = rho_d if rho_d is not None else p.rho
    if rho is None:
        raise ValueError(f"{type(d).__name__} has no density; set DPParams.rho")
    m = geo.total_mass(d)
    return c.G * rho * m / (6.0 * _SQRT_PI * c.hbar) * (p.a / p.r_DP) ** 3
