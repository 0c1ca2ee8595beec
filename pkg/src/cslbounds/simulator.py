"""Stochastic damped harmonic oscillator used as a Monte-Carlo oracle.

    m x'' = -m w^2 x - (m w / Q) x' + F(t),   <F(t) F(t')> = (S_ff / 2) delta(t - t')

``S_ff`` is the one-sided force PSD. The step is the exact solution of the
linear SDE over ``dt``, not Euler-Maruyama:

    s_{n+1} = Phi(dt) s_n + w_n,   w_n ~ N(0, Sigma),
    Sigma = P_inf - Phi P_inf Phi^T,
    P_inf = diag(S_ff Q / (4 m^2 w^3), S_ff Q / (4 m^2 w)).

``Phi(t)`` is the underdamped propagator (Q >= 1 keeps it underdamped).
The identity for ``Sigma`` holds because ``P_inf`` solves the stationary
Lyapunov equation.

Random numbers come from numpy's Philox4x64 counter-based generator, seeded
with a 64-bit integer. Normals are drawn with numpy's ziggurat sampler.
Output is bit-identical for a fixed seed within one numpy version.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .budgets import ResonatorSpec

__all__ = [
    "SimConfig", "TimeSeries", "SimulationError",
    "propagator", "step_matrices", "stationary_covariance",
    "simulate", "psd_welch", "infer_force_psd", "displacement_psd",
]


class SimulationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SimConfig:
    resonator: ResonatorSpec
    S_ff_total: float      # N^2/Hz, one-sided
    dt: float              # s
    duration: float        # s
    seed: int = 0
    x0: float = 0.0
    v0: float = 0.0

    def __post_init__(self):
        r = self.resonator
        if not (math.isfinite(self.S_ff_total) and self.S_ff_total >= 0):
            raise ValueError(f"S_ff_total must be finite and >= 0, got {self.S_ff_total!r}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if self.dt > 0.05 * 2 * math.pi / r.omega:
            raise ValueError(f"dt={self.dt:g} s exceeds 1/20 of the oscillation period "
                             f"{2 * math.pi / r.omega:g} s")
        if not (math.isfinite(self.duration) and self.duration >= self.dt):
            raise ValueError(f"duration must cover at least one step, got {self.duration!r}")
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not (math.isfinite(self.x0) and math.isfinite(self.v0)):
            raise ValueError("initial state must be finite")
        tau = 2 * r.Q / r.omega
        if self.duration < 100 * tau:
            warnings.warn(f"duration {self.duration:g} s is shorter than 100 amplitude "
                          f"relaxation times ({100 * tau:g} s)", stacklevel=2)

    @property
    def n_samples(self) -> int:
        ratio = self.duration / self.dt
        n = math.floor(ratio)
        # guard against 0.3/0.1 = 2.9999999999999996
        if ratio - n > 1 - 1e-9:
            n += 1
        return int(n)


@dataclass
class TimeSeries:
    dt: float
    samples: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def t(self):
        return self.dt * np.arange(self.samples.size)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("t_s", "x_m"))
        for t, x in zip(self.t.tolist(), self.samples.tolist()):
            w.writerow((repr(t), repr(x)))
        return buf.getvalue()

    def metadata_json(self) -> str:
        doc = {"format": "cslbounds.time_series/1", "dt_s": self.dt,
               "n_samples": int(self.samples.size), "metadata": self.metadata}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_csv(cls, text, metadata=None):
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["t_s", "x_m"]:
            raise ValueError("time-series CSV must start with header 't_s,x_m'")
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
        if data.shape[0] < 2:
            raise ValueError("time series needs at least two samples")
        dt = float(np.mean(np.diff(data[:, 0])))
        return cls(dt, data[:, 1], metadata or {})


def propagator(r: ResonatorSpec, t):
    """Deterministic flow map Phi(t) for state (x, v); shape ``t.shape + (2, 2)``."""
    t = np.asarray(t, dtype=float)
    h = 0.5 * r.gamma
    wd = math.sqrt(r.omega**2 - h * h)
    e = np.exp(-h * t)
    c, s = np.cos(wd * t), np.sin(wd * t)
    phi = np.empty(t.shape + (2, 2))
    phi[..., 0, 0] = e * (c + h / wd * s)
    phi[..., 0, 1] = e * s / wd
    phi[..., 1, 0] = -e * r.omega**2 * s / wd
    phi[..., 1, 1] = e * (c - h / wd * s)
    return phi


def stationary_covariance(r: ResonatorSpec, S_ff):
    var_x = S_ff * r.Q / (4.0 * r.mass**2 * r.omega**3)
    return np.diag([var_x, var_x * r.omega**2])


def step_matrices(r: ResonatorSpec, dt, S_ff):
    """Exact one-step propagator and noise covariance."""
    phi = propagator(r, dt)
    p = stationary_covariance(r, S_ff)
    sigma = p - phi @ p @ phi.T
    return phi, 0.5 * (sigma + sigma.T)


def _chol2(s):
    l11 = math.sqrt(max(s[0, 0], 0.0))
    l21 = s[1, 0] / l11 if l11 > 0 else 0.0
    l22 = math.sqrt(max(s[1, 1] - l21 * l21, 0.0))
    return l11, l21, l22


def simulate(c: SimConfig) -> TimeSeries:
    """Position samples at t = 0, dt, ..., (n-1) dt, starting from (x0, v0)."""
    r = c.resonator
    n = c.n_samples
    phi, sigma = step_matrices(r, c.dt, c.S_ff_total)
    k = np.arange(n)
    flow = propagator(r, k * c.dt)
    x = flow[:, 0, 0] * c.x0 + flow[:, 0, 1] * c.v0
    if c.S_ff_total > 0 and n > 1:
        rng = np.random.Generator(np.random.Philox(int(c.seed)))
        z = rng.standard_normal((n - 1, 2))
        l11, l21, l22 = _chol2(sigma)
        wx = l11 * z[:, 0]
        wv = l21 * z[:, 0] + l22 * z[:, 1]
        # x-row of (zI - Phi)^{-1}: [z - Phi22, Phi12] / (z^2 - tr z + det)
        den = [1.0, -(phi[0, 0] + phi[1, 1]), phi[0, 0] * phi[1, 1] - phi[0, 1] * phi[1, 0]]
        q = signal.lfilter([1.0, -phi[1, 1]], den, wx) + signal.lfilter([0.0, phi[0, 1]], den, wv)
        x[1:] += q
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise SimulationError(f"non-finite state at step {int(bad[0])} (t={bad[0] * c.dt:g} s)")
    meta = {
        "mass_kg": r.mass, "omega_rad_s": r.omega, "Q": r.Q, "T_K": r.T,
        "S_ff_total_N2_per_Hz": c.S_ff_total, "dt_s": c.dt, "duration_s": c.duration,
        "seed": int(c.seed), "x0_m": c.x0, "v0_m_s": c.v0,
        "rng": "numpy Philox4x64 + ziggurat normals",
    }
    return TimeSeries(c.dt, x, meta)


def psd_welch(ts: TimeSeries, segment_length: int, overlap: float = 0.5):
    """One-sided Welch PSD (m^2/Hz) with a Hann window and mean removal.

    Density scaling makes the PSD integrate to the series variance.
    """
    n = ts.samples.size
    segment_length = int(segment_length)
    if not 2 <= segment_length <= n:
        raise ValueError(f"segment_length must be in [2, {n}], got {segment_length}")
    if not 0.0 <= overlap <= 0.9:
        raise ValueError(f"overlap must be in [0, 0.9], got {overlap}")
    noverlap = int(round(overlap * segment_length))
    f, p = signal.welch(ts.samples, fs=1.0 / ts.dt, window="hann", nperseg=segment_length,
                        noverlap=noverlap, detrend="constant", return_onesided=True,
                        scaling="density")
    return f, p


def displacement_psd(r: ResonatorSpec, f, S_ff):
    """Continuous-time one-sided S_xx for white force noise S_ff."""
    w = 2 * np.pi * np.asarray(f, dtype=float)
    return S_ff / (r.mass**2 * ((r.omega**2 - w**2) ** 2 + (r.omega * w / r.Q) ** 2))


def infer_force_psd(r: ResonatorSpec, f, S_xx):
    """Invert the mechanical susceptibility: S_ff = S_xx |m (w0^2 - w^2 + i w0 w / Q)|^2."""
    w = 2 * np.pi * np.asarray(f, dtype=float)
    return np.asarray(S_xx) * r.mass**2 * ((r.omega**2 - w**2) ** 2 + (r.omega * w / r.Q) ** 2)
