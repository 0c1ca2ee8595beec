import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cslbounds.budgets import CalorimeterSpec, CloudSpec, ResonatorSpec
from cslbounds.constants import constants
from cslbounds.exclusion import (CSV_HEADER, CURVE_FORMAT, NO_CONSTRAINT, CalorimeterExperiment,
                                 CloudExperiment, ExclusionCurve, ExclusionError, MechanicalExperiment,
                                 default_grid, envelope, exclusion_curve, lambda_upper)
from cslbounds.geometry import Cuboid, Point, Sphere

C = constants()


def calorimeter(ceiling=1e-11):
    return CalorimeterExperiment(CalorimeterSpec(1.0, ceiling), "calorimeter")


def test_calorimeter_bound():
    lam = lambda_upper(calorimeter(), 1e-7)
    assert lam == pytest.approx(4 / 3 * 1e-11 * 1e-14 * C.m_nucleon**2 / C.hbar**2, rel=1e-14)
    assert 2.55e-11 <= lam <= 3.9e-11
    assert lam == pytest.approx(3.4e-11, rel=0.02)


def test_calorimeter_r_squared_scaling():
    assert lambda_upper(calorimeter(), 2e-7) == pytest.approx(4 * lambda_upper(calorimeter(), 1e-7), rel=1e-14)
    c = exclusion_curve(calorimeter())
    ratio = c.lambda_upper / c.r_C**2
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-13)
    assert c.r_C.size == 61 and c.r_C[0] == pytest.approx(1e-9) and c.r_C[-1] == pytest.approx(1e-4)


def test_mechanical_point_inversion():
    res = ResonatorSpec(C.m_nucleon, 1.0, 1.0, 1.0)
    spec = MechanicalExperiment(res, Point(C.m_nucleon), 2 * C.hbar**2 * 5e-3)
    assert lambda_upper(spec, 1e-7) == pytest.approx(1e-16, rel=1e-6)


def test_cloud_inverse_is_consistent():
    from cslbounds.budgets import cloud_energy_rate
    cl = CloudSpec(86.909180527 * C.amu, 87, 5.2e-34)
    lam = lambda_upper(CloudExperiment(cl), 1e-7)
    assert cloud_energy_rate(cl, lam, 1e-7) == pytest.approx(5.2e-34, rel=1e-13)


def test_mass_mismatch_rejected():
    with pytest.raises(ValueError, match="weighs"):
        MechanicalExperiment(ResonatorSpec(1.0, 1.0, 1.0, 1.0), Sphere(1.1, 1e-3), 1e-30)
    # within 1e-6 is fine
    MechanicalExperiment(ResonatorSpec(1.0, 1.0, 1.0, 1.0), Sphere(1.0 + 5e-7, 1e-3), 1e-30)


def test_density_doubling_small_regime():
    def spec(rho):
        R = 5e-9
        m = rho * 4 / 3 * math.pi * R**3
        return MechanicalExperiment(ResonatorSpec(m, 1e3, 1e3, 1.0), Sphere(m, R), 1e-40)
    assert lambda_upper(spec(2000.0), 1e-7) / lambda_upper(spec(4000.0), 1e-7) == pytest.approx(4.0, rel=1e-3)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-40, 1e-30), st.floats(1.01, 100.0), st.floats(1e-9, 1e-4))
def test_monotone_in_ceiling(ceiling, factor, r):
    m = 1e-15
    res = ResonatorSpec(m, 1e3, 1e3, 1.0)
    a = lambda_upper(MechanicalExperiment(res, Sphere(m, 1e-7), ceiling), r)
    b = lambda_upper(MechanicalExperiment(res, Sphere(m, 1e-7), ceiling * factor), r)
    assert b > a
    assert lambda_upper(calorimeter(ceiling * factor), r) > lambda_upper(calorimeter(ceiling), r)


def test_slab_curve_minimum_near_thickness():
    lz = 1e-7
    rho, lx = 2000.0, 20e-6
    m = rho * lx * lx * lz
    spec = MechanicalExperiment(ResonatorSpec(m, 1e3, 1e4, 0.1), Cuboid(m, lx, lx, lz), 1e-35)
    c = exclusion_curve(spec, default_grid(1e-9, 1e-5, 81))
    r_best = c.r_C[np.argmin(c.lambda_upper)]
    assert lz / 3 <= r_best <= 3 * lz


def test_grid_errors():
    with pytest.raises(ExclusionError):
        exclusion_curve(calorimeter(), [])
    with pytest.raises(ExclusionError):
        exclusion_curve(calorimeter(), [1e-7, 1e-8])
    with pytest.raises(ExclusionError):
        exclusion_curve(calorimeter(), [-1e-7, 1e-8])


def test_quadrature_failure_names_rc():
    from cslbounds.geometry import Union
    u = Union(((Sphere(1e-15, 1e-6), (0, 0, 0)), (Sphere(1e-15, 1e-6), (0, 0, 1e-5))))
    spec = MechanicalExperiment(ResonatorSpec(2e-15, 1e3, 1e3, 1.0), u, 1e-35)
    with pytest.raises(ExclusionError, match=r"r_C=1\.000000e-08"):
        exclusion_curve(spec, [1e-8])


def test_no_constraint_is_not_a_number():
    assert NO_CONSTRAINT is None


def test_parallel_sweep_is_deterministic():
    m = 1e-12
    spec = MechanicalExperiment(ResonatorSpec(m, 1e3, 1e4, 0.1), Cuboid(m, 1e-5, 1e-5, m / (2000 * 1e-10)), 1e-35)
    a = exclusion_curve(spec, default_grid(1e-9, 1e-4, 21))
    b = exclusion_curve(spec, default_grid(1e-9, 1e-4, 21), workers=4)
    assert a.to_json() == b.to_json()


# -- envelope -------------------------------------------------------------------

GRID = default_grid(1e-9, 1e-4, 11)


def synth(label, f):
    return ExclusionCurve(GRID, f(GRID), label)


curves = st.builds(
    lambda label, a, p: synth(label, lambda r: a * (r / 1e-7) ** p),
    st.sampled_from(list("abcdef")), st.floats(1e-15, 1e-5), st.floats(-2.0, 2.0))


def same(x, y):
    return (np.array_equal(x.lambda_upper, y.lambda_upper) and x.label == y.label
            and x.metadata.get("winner") == y.metadata.get("winner"))


def test_envelope_single_is_identity():
    c = synth("a", lambda r: r**2)
    assert envelope([c]) is c


def test_envelope_weaker_curve():
    strong = synth("strong", lambda r: 1e-10 * (r / 1e-7) ** 2)
    weak = synth("weak", lambda r: 1e-9 * (r / 1e-7) ** 2)
    e = envelope([weak, strong])
    np.testing.assert_array_equal(e.lambda_upper, strong.lambda_upper)
    assert set(e.metadata["winner"]) == {"strong"}


def test_envelope_crossing():
    # a ~ r^2 and b ~ r^-1 cross exactly at r = 1e-7
    a = synth("rising", lambda r: 1e-8 * (r / 1e-7) ** 2)
    b = synth("falling", lambda r: 1e-8 * (r / 1e-7) ** -1)
    e = envelope([a, b])
    k = int(np.argmin(np.abs(GRID - 1e-7)))
    w = e.metadata["winner"]
    assert all(x == "rising" for x in w[:k]) and all(x == "falling" for x in w[k + 1:])
    assert w[k] == "falling"   # exact tie goes to the alphabetically first label


@settings(max_examples=60)
@given(curves, curves)
def test_envelope_commutative(a, b):
    assert same(envelope([a, b]), envelope([b, a]))


@settings(max_examples=60)
@given(curves)
def test_envelope_idempotent(a):
    e = envelope([a, a])
    np.testing.assert_array_equal(e.lambda_upper, a.lambda_upper)
    assert same(envelope([e, e]), e)


@settings(max_examples=60)
@given(curves, curves, curves)
def test_envelope_associative(a, b, c):
    assert same(envelope([envelope([a, b]), c]), envelope([a, envelope([b, c])]))


def test_envelope_grid_mismatch():
    a = synth("a", lambda r: r)
    b = ExclusionCurve(default_grid(1e-9, 1e-4, 12), np.ones(12), "b")
    with pytest.raises(ExclusionError, match="different r_C grid"):
        envelope([a, b])


# -- serialization ----------------------------------------------------------------

def test_csv_contract():
    c = exclusion_curve(calorimeter(), default_grid(1e-9, 1e-4, 51))
    rows = list(csv.reader(io.StringIO(c.to_csv())))
    assert tuple(rows[0]) == CSV_HEADER == ("r_C_m", "lambda_upper_Hz")
    vals = np.array(rows[1:], dtype=float)
    np.testing.assert_array_equal(vals[:, 0], c.r_C)
    np.testing.assert_array_equal(vals[:, 1], c.lambda_upper)
    row = vals[np.argmin(np.abs(vals[:, 0] - 1e-7))]
    assert row[1] == pytest.approx(3.4e-11, rel=0.15)


def test_json_contract_roundtrip():
    c = exclusion_curve(calorimeter(), GRID)
    d = json.loads(c.to_json())
    assert d["format"] == CURVE_FORMAT
    assert set(d) == {"format", "label", "r_C_m", "lambda_upper_Hz", "metadata"}
    assert {"kind", "spec", "tolerances", "constants"} <= set(d["metadata"])
    assert d["metadata"]["spec"]["calorimeter"]["heat_leak_ceiling"] == 1e-11
    back = ExclusionCurve.from_json(c.to_json())
    np.testing.assert_array_equal(back.lambda_upper, c.lambda_upper)
    assert back.to_json() == c.to_json()
    with pytest.raises(ExclusionError):
        ExclusionCurve.from_dict({"format": "other"})


@pytest.mark.parametrize("lam", [[1.0, math.inf], [1.0, 0.0], [1.0, -1.0], [1.0, math.nan]])
def test_curve_invariants(lam):
    with pytest.raises(ExclusionError):
        ExclusionCurve([1e-8, 1e-7], lam, "x")
