import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cslbounds.budgets import ResonatorSpec, thermal_force_psd
from cslbounds.constants import constants
from cslbounds.simulator import (SimConfig, SimulationError, TimeSeries, displacement_psd,
                                 infer_force_psd, propagator, psd_welch, simulate,
                                 stationary_covariance, step_matrices)

C = constants()
RES = ResonatorSpec(1e-12, 2 * math.pi * 1e3, 100.0, 1.0)
TAU = 2 * RES.Q / RES.omega


def cfg(**kw):
    base = dict(resonator=RES, S_ff_total=thermal_force_psd(RES), dt=2.5e-5, duration=200 * TAU, seed=1)
    base.update(kw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return SimConfig(**base)


def test_free_decay_envelope():
    r = ResonatorSpec(1e-12, 2 * math.pi * 1e3, 1e4, 1.0)
    tau = 2 * r.Q / r.omega
    # sample exactly at t = tau: choose dt as an integer fraction of tau
    n = 80000
    dt = tau / n
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ts = simulate(SimConfig(r, 0.0, dt, tau + 2.5 * dt, x0=1.0))
    # x0=1, v0=0: x(t) = e^{-t/tau}(cos wd t + (h/wd) sin wd t); the envelope
    # is sqrt(1 + (h/wd)^2) e^{-t/tau}
    h = r.omega / (2 * r.Q)
    wd = math.sqrt(r.omega**2 - h * h)
    env = math.exp(-1.0) * math.sqrt(1 + (h / wd) ** 2)
    x = ts.samples[n]
    expected = math.exp(-1.0) * (math.cos(wd * tau) + h / wd * math.sin(wd * tau))
    assert x == pytest.approx(expected, rel=1e-9)
    assert abs(x) <= env * (1 + 1e-12)
    # three consecutive samples of a damped cosine fix its envelope:
    # x_n^2 - x_{n-1} x_{n+1} = E^2 sin^2(wd dt)
    xm, x0, xp = ts.samples[n - 1:n + 2]
    envelope = math.sqrt(x0 * x0 - xm * xp) / abs(math.sin(wd * dt))
    assert envelope == pytest.approx(math.exp(-1.0), rel=1e-6)


@settings(max_examples=30)
@given(st.floats(1e-6, 1e-4), st.floats(1.0, 1e6))
def test_step_halving_exact(dt, q):
    r = ResonatorSpec(1e-12, 2 * math.pi * 500, q, 1.0)
    full = propagator(r, dt)
    half = propagator(r, dt / 2)
    np.testing.assert_allclose(half @ half, full, rtol=1e-12, atol=1e-12 * np.abs(full).max())


def test_noise_covariance_composes():
    phi1, s1 = step_matrices(RES, 1e-5, 1e-30)
    phi2, s2 = step_matrices(RES, 2e-5, 1e-30)
    np.testing.assert_allclose(phi1 @ s1 @ phi1.T + s1, s2, rtol=1e-10)
    assert np.all(np.linalg.eigvalsh(s1) > 0)


def test_determinism():
    a, b = simulate(cfg(duration=0.2)), simulate(cfg(duration=0.2))
    assert a.samples.tobytes() == b.samples.tobytes()
    assert simulate(cfg(duration=0.2, seed=2)).samples.tobytes() != a.samples.tobytes()


def test_length_and_metadata():
    ts = simulate(cfg(dt=0.1e-4, duration=0.3e-4 * 1000))
    assert ts.samples.size == 3000
    assert ts.metadata["seed"] == 1 and ts.metadata["dt_s"] == 0.1e-4


def test_equipartition():
    c = cfg(duration=400 * TAU, seed=11)
    x = simulate(c).samples[int(10 * TAU / c.dt):]
    target = C.k_B * RES.T / (RES.mass * RES.omega**2)
    # block means: each block spans many correlation times
    blocks = x[: x.size // 40 * 40].reshape(40, -1)
    v = np.mean(blocks**2, axis=1)
    se = v.std(ddof=1) / math.sqrt(v.size)
    assert abs(v.mean() - target) < 3 * se
    assert stationary_covariance(RES, c.S_ff_total)[0, 0] == pytest.approx(target, rel=1e-12)


def test_csl_raises_variance_by_the_ratio():
    s_th = thermal_force_psd(RES)
    v = []
    for s in (s_th, 2 * s_th):
        ratios = []
        for seed in range(8):
            x = simulate(cfg(S_ff_total=s, duration=100 * TAU, seed=100 + seed)).samples
            ratios.append(np.mean(x[int(10 * TAU / 2.5e-5):] ** 2))
        v.append(np.array(ratios))
    ratio = v[1].mean() / v[0].mean()
    se = ratio * math.hypot(v[0].std(ddof=1) / v[0].mean(), v[1].std(ddof=1) / v[1].mean()) / math.sqrt(8)
    assert abs(ratio - 2.0) < 3 * se


def test_parseval_sinusoid():
    dt, n, f0, a = 1e-3, 2**16, 37.3, 2.5
    t = dt * np.arange(n)
    ts = TimeSeries(dt, a * np.sin(2 * math.pi * f0 * t))
    f, p = psd_welch(ts, 4096, 0.5)
    assert np.trapezoid(p, f) == pytest.approx(a * a / 2, rel=0.02)


def test_white_noise_level():
    dt, sigma = 1e-4, 3.0
    x = np.random.default_rng(5).normal(0, sigma, 2**20)
    f, p = psd_welch(TimeSeries(dt, x), 1024, 0.5)
    level = np.mean(p[1:-1])
    se = level / math.sqrt((p.size - 2) * (2 * x.size / 1024 - 1))
    assert abs(level - 2 * sigma**2 * dt) < 5 * se + 1e-3 * level


def test_inferred_force_psd():
    c = cfg(duration=400 * TAU, seed=3)
    f, p = psd_welch(simulate(c), 16384, 0.5)
    sel = (f > 0.9e3) & (f < 1.1e3)
    inferred = np.mean(infer_force_psd(RES, f[sel], p[sel]))
    assert inferred == pytest.approx(c.S_ff_total, rel=0.15)
    np.testing.assert_allclose(infer_force_psd(RES, f, displacement_psd(RES, f, 2.0)), 2.0, rtol=1e-12)


def test_csv_roundtrip():
    ts = simulate(cfg(duration=0.05))
    back = TimeSeries.from_csv(ts.to_csv())
    np.testing.assert_array_equal(back.samples, ts.samples)
    assert back.dt == pytest.approx(ts.dt, rel=1e-12)
    assert ts.to_csv().splitlines()[0] == "t_s,x_m"
    assert '"format": "cslbounds.time_series/1"' in ts.metadata_json()
    with pytest.raises(ValueError):
        TimeSeries.from_csv("a,b\n1,2\n")


def test_config_validation():
    with pytest.raises(ValueError, match="1/20"):
        cfg(dt=0.06e-3)
    with pytest.raises(ValueError):
        cfg(dt=0.0)
    with pytest.raises(ValueError):
        cfg(seed=-1)
    with pytest.raises(ValueError):
        cfg(seed=2**64)
    with pytest.raises(ValueError):
        cfg(S_ff_total=math.nan)
    with pytest.warns(UserWarning, match="relaxation"):
        SimConfig(RES, 0.0, 1e-5, 10 * TAU)


def test_psd_validation():
    ts = TimeSeries(1e-3, np.zeros(100))
    with pytest.raises(ValueError):
        psd_welch(ts, 200)
    with pytest.raises(ValueError):
        psd_welch(ts, 50, 0.95)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_state_is_reported():
    with pytest.raises(SimulationError, match="step"):
        simulate(cfg(S_ff_total=1e300, duration=0.01))
