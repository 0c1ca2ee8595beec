"""Rigid mass distributions and their Fourier transforms.

Every primitive is centred on the origin. Translations are expressed
through :class:`Union`; there are no rotations apart from the cylinder
axis. The transform convention is

    rho~(k) = integral d^3r exp(i k.r) rho(r),

so ``rho~(0)`` is the total mass and ``rho~(-k) = conj(rho~(k))``.

The collapse-noise motion axis is always the laboratory z axis. A plate or
disk is therefore built with its thin dimension along z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import j1

__all__ = [
    "Point", "Sphere", "Cuboid", "Cylinder", "Multilayer", "Union",
    "MassDistribution", "AxisFactor",
    "form_factor", "separable_axes", "total_mass", "uniform_density",
    "extent", "axis_extents",
]

_SINC_SERIES = 1e-4
_SPHERE_SERIES = 0.1


def _positive(name, value):
    if not (isinstance(value, (int, float, np.floating)) and math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def sinc(x):
    """sin(x)/x with a Taylor branch near zero."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SINC_SERIES
    xs = np.where(small, 1.0, x)
    x2 = x * x
    return np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0, np.sin(xs) / xs)


def sphere_factor(x):
    """3 (sin x - x cos x) / x**3, normalised to 1 at x = 0.

    The direct formula loses ~x**-3 ulps to cancellation, so the series
    takes over below x = 0.1 (truncation error there is below 1e-19).
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SPHERE_SERIES
    xs = np.where(small, 1.0, x)
    x2 = x * x
    series = 1.0 + x2 * (-1.0 / 10 + x2 * (1.0 / 280 + x2 * (-1.0 / 15120 + x2 / 1330560)))
    direct = 3.0 * (np.sin(xs) - xs * np.cos(xs)) / xs**3
    return np.where(small, series, direct)


def airy_factor(x):
    """2 J1(x) / x, normalised to 1 at x = 0."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    xs = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 8.0, 2.0 * j1(xs) / xs)


def _as_k(k):
    k = np.asarray(k, dtype=float)
    if k.shape[-1:] != (3,):
        raise ValueError(f"wavevector array must have a trailing axis of length 3, got shape {k.shape}")
    if not np.all(np.isfinite(k)):
        raise ValueError("wavevector contains non-finite components")
    return k


@dataclass(frozen=True)
class Point:
    mass: float

    def __post_init__(self):
        _positive("mass", self.mass)

    @property
    def total_mass(self):
        return self.mass

    def _ff(self, k):
        return np.full(k.shape[:-1], self.mass, dtype=complex)


@dataclass(frozen=True)
class Sphere:
    mass: float
    radius: float

    def __post_init__(self):
        _positive("mass", self.mass)
        _positive("radius", self.radius)

    @property
    def total_mass(self):
        return self.mass

    @property
    def density(self):
        return self.mass / (4.0 / 3.0 * math.pi * self.radius**3)

    def _ff(self, k):
        kk = np.linalg.norm(k, axis=-1)
        return (self.mass * sphere_factor(kk * self.radius)).astype(complex)


@dataclass(frozen=True)
class Cuboid:
    mass: float
    lx: float
    ly: float
    lz: float

    def __post_init__(self):
        _positive("mass", self.mass)
        for n in ("lx", "ly", "lz"):
            _positive(n, getattr(self, n))

    @property
    def total_mass(self):
        return self.mass

    @property
    def density(self):
        return self.mass / (self.lx * self.ly * self.lz)

    def _ff(self, k):
        f = (sinc(0.5 * k[..., 0] * self.lx) * sinc(0.5 * k[..., 1] * self.ly)
             * sinc(0.5 * k[..., 2] * self.lz))
        return (self.mass * f).astype(complex)


@dataclass(frozen=True)
class Cylinder:
    mass: float
    radius: float
    height: float
    axis: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        _positive("mass", self.mass)
        _positive("radius", self.radius)
        _positive("height", self.height)
        n = np.asarray(self.axis, dtype=float)
        if n.shape != (3,) or not np.all(np.isfinite(n)) or np.linalg.norm(n) == 0:
            raise ValueError(f"cylinder axis must be a non-zero 3-vector, got {self.axis!r}")
        object.__setattr__(self, "axis", tuple(float(c) for c in n / np.linalg.norm(n)))

    @property
    def total_mass(self):
        return self.mass

    @property
    def density(self):
        return self.mass / (math.pi * self.radius**2 * self.height)

    def _ff(self, k):
        n = np.asarray(self.axis)
        kpar = k @ n
        kperp = np.sqrt(np.maximum(np.einsum("...i,...i->...", k, k) - kpar**2, 0.0))
        f = airy_factor(kperp * self.radius) * sinc(0.5 * kpar * self.height)
        return (self.mass * f).astype(complex)


@dataclass(frozen=True)
class Multilayer:
    """Slab stack along z with a rectangular ``lx`` x ``ly`` footprint.

    ``layers`` lists ``(density, thickness)`` from the bottom up. The stack
    is centred on its geometric mid-plane.
    """

    lx: float
    ly: float
    layers: tuple

    def __post_init__(self):
        _positive("lx", self.lx)
        _positive("ly", self.ly)
        layers = tuple((float(r), float(t)) for r, t in self.layers)
        if not layers:
            raise ValueError("multilayer needs at least one layer")
        for i, (r, t) in enumerate(layers):
            _positive(f"layers[{i}].density", r)
            _positive(f"layers[{i}].thickness", t)
        object.__setattr__(self, "layers", layers)

    @property
    def thickness(self):
        return sum(t for _, t in self.layers)

    @property
    def total_mass(self):
        return self.lx * self.ly * sum(r * t for r, t in self.layers)

    @property
    def density(self):
        rhos = {r for r, _ in self.layers}
        return rhos.pop() if len(rhos) == 1 else None

    def interfaces(self):
        """Interface heights and the density jump (below minus above) at each."""
        z = np.concatenate([[0.0], np.cumsum([t for _, t in self.layers])]) - 0.5 * self.thickness
        rho = np.array([0.0] + [r for r, _ in self.layers] + [0.0])
        return z, rho[:-1] - rho[1:]

    def stack_transform(self, kz):
        kz = np.asarray(kz, dtype=float)
        z0 = -0.5 * self.thickness
        out = np.zeros(kz.shape, dtype=complex)
        for rho, t in self.layers:
            zc = z0 + 0.5 * t
            out += rho * t * np.exp(1j * kz * zc) * sinc(0.5 * kz * t)
            z0 += t
        return out

    def _ff(self, k):
        transverse = self.lx * self.ly * sinc(0.5 * k[..., 0] * self.lx) * sinc(0.5 * k[..., 1] * self.ly)
        return transverse * self.stack_transform(k[..., 2])


@dataclass(frozen=True)
class Union:
    """Rigid assembly of distributions, each translated by an offset."""

    parts: tuple

    def __post_init__(self):
        parts = []
        for item in self.parts:
            dist, offset = item
            if not isinstance(dist, _VARIANTS):
                raise ValueError(f"union part must be a mass distribution, got {type(dist).__name__}")
            off = np.asarray(offset, dtype=float)
            if off.shape != (3,) or not np.all(np.isfinite(off)):
                raise ValueError(f"union offset must be a finite 3-vector, got {offset!r}")
            parts.append((dist, tuple(float(c) for c in off)))
        if not parts:
            raise ValueError("union needs at least one part")
        object.__setattr__(self, "parts", tuple(parts))

    @property
    def total_mass(self):
        return sum(d.total_mass for d, _ in self.parts)

    @property
    def density(self):
        rhos = [uniform_density(d) for d, _ in self.parts]
        if any(r is None for r in rhos):
            return None
        return rhos[0] if all(math.isclose(r, rhos[0], rel_tol=1e-12) for r in rhos) else None

    def _ff(self, k):
        out = np.zeros(k.shape[:-1], dtype=complex)
        for dist, off in self.parts:
            out += np.exp(1j * (k @ np.asarray(off))) * dist._ff(k)
        return out


_VARIANTS = (Point, Sphere, Cuboid, Cylinder, Multilayer, Union)
MassDistribution = Point | Sphere | Cuboid | Cylinder | Multilayer | Union


def _check(d):
    if not isinstance(d, _VARIANTS):
        raise TypeError(f"not a mass distribution: {type(d).__name__}")


def form_factor(d: MassDistribution, k) -> np.ndarray:
    """Fourier transform of the density at wavevector(s) ``k`` (m^-1).

    ``k`` has shape ``(..., 3)``; the result has shape ``(...)`` in kg.
    """
    _check(d)
    return d._ff(_as_k(k))


def total_mass(d: MassDistribution) -> float:
    _check(d)
    return float(d.total_mass)


def uniform_density(d: MassDistribution) -> Optional[float]:
    """Single bulk density of ``d``, or None if it has none (point, mixed)."""
    _check(d)
    return getattr(d, "density", None)


def axis_extents(d: MassDistribution) -> np.ndarray:
    """Half-widths of the axis-aligned bounding box about the origin."""
    _check(d)
    if isinstance(d, Point):
        return np.zeros(3)
    if isinstance(d, Sphere):
        return np.full(3, d.radius)
    if isinstance(d, Cuboid):
        return 0.5 * np.array([d.lx, d.ly, d.lz])
    if isinstance(d, Multilayer):
        return 0.5 * np.array([d.lx, d.ly, d.thickness])
    if isinstance(d, Cylinder):
        n = np.abs(np.asarray(d.axis))
        return 0.5 * d.height * n + d.radius * np.sqrt(np.maximum(1.0 - n**2, 0.0))
    return np.max([np.abs(off) + axis_extents(p) for p, off in d.parts], axis=0)


def extent(d: MassDistribution) -> float:
    """Diameter of the smallest origin-centred sphere enclosing ``d``."""
    _check(d)
    if isinstance(d, Point):
        return 0.0
    if isinstance(d, Sphere):
        return 2.0 * d.radius
    if isinstance(d, Cylinder):
        return 2.0 * math.hypot(d.radius, 0.5 * d.height)
    if isinstance(d, Union):
        return max(2.0 * float(np.linalg.norm(off)) + extent(p) for p, off in d.parts)
    return 2.0 * float(np.linalg.norm(axis_extents(d)))


@dataclass(frozen=True)
class AxisFactor:
    """One Cartesian factor of a separable ``|rho~(k)|**2``.

    kind ``"sinc2"``: ``scale * sinc(k L / 2)**2`` for a uniform segment of
    length ``length``.
    kind ``"stack"``: ``scale * |S(k)|**2`` with ``S`` the transform of the
    piecewise-constant profile ``layers`` (density, thickness).
    """

    kind: str
    length: float
    scale: float = 1.0
    layers: tuple = field(default=())

    def power(self, k):
        k = np.asarray(k, dtype=float)
        if self.kind == "sinc2":
            return self.scale * sinc(0.5 * k * self.length) ** 2
        s = Multilayer(1.0, 1.0, self.layers).stack_transform(k)
        return self.scale * (s.real**2 + s.imag**2)

    def jumps(self):
        """Edge positions and weights w_j with k^2 power = |sum_j w_j e^{ikz_j}|^2."""
        if self.kind == "sinc2":
            c = math.sqrt(self.scale) / self.length
            return np.array([-0.5 * self.length, 0.5 * self.length]), np.array([c, -c])
        z, dr = Multilayer(1.0, 1.0, self.layers).interfaces()
        return z, math.sqrt(self.scale) * dr


def separable_axes(d: MassDistribution):
    """Per-axis factors ``(fx, fy, fz)`` with ``|rho~|^2 = fx(kx) fy(ky) fz(kz)``.

    Returns None for shapes without a Cartesian product structure.
    """
    _check(d)
    if isinstance(d, Cuboid):
        return (AxisFactor("sinc2", d.lx), AxisFactor("sinc2", d.ly),
                AxisFactor("sinc2", d.lz, scale=d.mass**2))
    if isinstance(d, Multilayer):
        return (AxisFactor("sinc2", d.lx), AxisFactor("sinc2", d.ly),
                AxisFactor("stack", d.thickness, scale=(d.lx * d.ly) ** 2, layers=d.layers))
    return None
