import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cslbounds import geometry as geo
from cslbounds.geometry import Cuboid, Cylinder, Multilayer, Point, Sphere, Union, form_factor
from oracles import form_factor_mc

pos = st.floats(1e-7, 1e-5)
kcomp = st.floats(-3e7, 3e7, allow_nan=False)
kvec = st.tuples(kcomp, kcomp, kcomp)


@st.composite
def distributions(draw):
    kind = draw(st.sampled_from(["point", "sphere", "cuboid", "cylinder", "multilayer", "union"]))
    m = draw(st.floats(1e-15, 1e-9))
    if kind == "point":
        return Point(m)
    if kind == "sphere":
        return Sphere(m, draw(pos))
    if kind == "cuboid":
        return Cuboid(m, draw(pos), draw(pos), draw(pos))
    if kind == "cylinder":
        axis = draw(st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(0.1, 1)))
        return Cylinder(m, draw(pos), draw(pos), axis)
    if kind == "multilayer":
        n = draw(st.integers(1, 5))
        layers = tuple((draw(st.floats(500, 20000)), draw(pos)) for _ in range(n))
        return Multilayer(draw(pos), draw(pos), layers)
    off = draw(st.tuples(pos, pos, pos))
    return Union(((Sphere(m, draw(pos)), (0, 0, 0)), (Cuboid(m, draw(pos), draw(pos), draw(pos)), off)))


@settings(max_examples=200, deadline=None)
@given(distributions(), kvec)
def test_hermitian_symmetry(d, k):
    k = np.array(k)
    a, b = form_factor(d, k), form_factor(d, -k)
    assert a == pytest.approx(np.conj(b), rel=1e-12, abs=1e-12 * d.total_mass)


@settings(max_examples=200, deadline=None)
@given(distributions(), kvec)
def test_bounded_by_mass(d, k):
    assert abs(form_factor(d, np.array(k))) <= d.total_mass * (1 + 1e-12)
    assert form_factor(d, np.zeros(3)) == pytest.approx(d.total_mass, rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-15, 1e-9), st.floats(1e5, 1e8))
def test_sphere_point_limit(m, k):
    kv = np.array([0.0, 0.0, k])
    assert form_factor(Sphere(m, 1e-6 / k), kv).real == pytest.approx(m, rel=1e-12)


def test_sphere_value():
    v = form_factor(Sphere(1.0, 1e-6), np.array([1e6, 0, 0]))
    assert v.real == pytest.approx(3 * (math.sin(1) - math.cos(1)), rel=1e-12)
    assert v.real == pytest.approx(0.9035, abs=1e-4)


def test_cuboid_zero_at_full_period():
    lx = 2e-6
    v = form_factor(Cuboid(1.0, lx, 1e-6, 1e-6), np.array([2 * math.pi / lx, 0, 0]))
    assert abs(v) < 1e-15


def test_small_argument_series_continuous():
    for x in (1e-5, 9.9e-5, 1e-4, 1.01e-4, 0.05, 0.099, 0.1, 0.101):
        assert geo.sinc(np.array(x)) == pytest.approx(math.sin(x) / x, rel=1e-15)
        if x < 0.05:   # the naive form cancels catastrophically down here
            ref = 1 - x**2 / 10 + x**4 / 280 - x**6 / 15120
        else:
            ref = 3 * (math.sin(x) - x * math.cos(x)) / x**3
        assert geo.sphere_factor(np.array(x)) == pytest.approx(ref, rel=1e-9)


def test_multilayer_equal_density_is_cuboid():
    rho, t = 8000.0, 3e-7
    ml = Multilayer(4e-6, 5e-6, ((rho, t), (rho, 2 * t)))
    cub = Cuboid(rho * 4e-6 * 5e-6 * 3 * t, 4e-6, 5e-6, 3 * t)
    rng = np.random.default_rng(1)
    k = rng.normal(scale=1e7, size=(500, 3))
    np.testing.assert_allclose(form_factor(ml, k), form_factor(cub, k), rtol=1e-12, atol=1e-14 * cub.mass)


def test_total_mass_and_union():
    ml = Multilayer(1e-6, 2e-6, ((19300.0, 1e-7), (2000.0, 2e-7)))
    assert ml.total_mass == pytest.approx(2e-12 * (19300 * 1e-7 + 2000 * 2e-7))
    u = Union(((Sphere(1.0, 1e-6), (0, 0, 0)), (ml, (1e-5, 0, 0))))
    assert geo.total_mass(u) == pytest.approx(1.0 + ml.total_mass)


def test_separable_axes():
    ax = geo.separable_axes(Cuboid(1.0, 1e-6, 2e-6, 3e-6))
    assert [a.kind for a in ax] == ["sinc2"] * 3
    ax = geo.separable_axes(Multilayer(1e-6, 1e-6, ((1.0, 1e-7), (2.0, 1e-7))))
    assert [a.kind for a in ax] == ["sinc2", "sinc2", "stack"]
    assert geo.separable_axes(Sphere(1.0, 1e-6)) is None
    assert geo.separable_axes(Cylinder(1.0, 1e-6, 1e-6)) is None
    assert geo.separable_axes(Union(((Sphere(1.0, 1e-6), (0, 0, 0)),))) is None


def test_separable_product_matches_form_factor():
    d = Multilayer(1e-6, 2e-6, ((19300.0, 1e-7), (2000.0, 2e-7), (7000.0, 5e-8)))
    ax = geo.separable_axes(d)
    rng = np.random.default_rng(2)
    k = rng.normal(scale=2e7, size=(200, 3))
    prod = ax[0].scale * ax[1].scale * ax[0].power(k[:, 0]) * ax[1].power(k[:, 1]) * ax[2].power(k[:, 2])
    np.testing.assert_allclose(prod, np.abs(form_factor(d, k)) ** 2, rtol=1e-10,
                               atol=1e-12 * d.total_mass**2)


@pytest.mark.parametrize("bad", [
    lambda: Sphere(-1.0, 1e-6),
    lambda: Cuboid(1.0, 0.0, 1e-6, 1e-6),
    lambda: Cylinder(1.0, 1e-6, 1e-6, (0, 0, 0)),
    lambda: Multilayer(1e-6, 1e-6, ()),
    lambda: Multilayer(1e-6, 1e-6, ((-1.0, 1e-7),)),
    lambda: Union(((Sphere(1.0, 1e-6), (math.inf, 0, 0)),)),
    lambda: Point(math.nan),
])
def test_invalid_distributions(bad):
    with pytest.raises(ValueError):
        bad()


def test_rejects_nonfinite_k():
    with pytest.raises(ValueError):
        form_factor(Sphere(1.0, 1e-6), np.array([math.nan, 0, 0]))


MC_SHAPES = [
    Sphere(1e-12, 1e-6),
    Cuboid(1e-12, 1e-6, 2e-6, 0.5e-6),
    Cylinder(1e-12, 0.8e-6, 1.5e-6, (0.3, -0.2, 1.0)),
    Multilayer(1e-6, 1.5e-6, ((19300.0, 2e-7), (2000.0, 3e-7), (19300.0, 1e-7))),
    Union(((Sphere(1e-12, 0.5e-6), (0, 0, 0)), (Cuboid(2e-12, 1e-6, 1e-6, 1e-6), (1.2e-6, 0.3e-6, -0.4e-6)))),
]


@pytest.mark.parametrize("d", MC_SHAPES, ids=lambda d: type(d).__name__)
def test_form_factor_monte_carlo_oracle(d):
    rng = np.random.default_rng(123)
    # |k| up to a few / size so the factor is far from both 0 and m
    k = rng.normal(size=(24, 3)) * 2.5e6
    re, im = form_factor_mc(d, k, n=400_000, seed=7)
    ff = form_factor(d, k)
    z_re = np.abs(ff.real - re.mean) / re.stderr
    z_im = np.abs(ff.imag - im.mean) / np.maximum(im.stderr, 1e-300)
    # |rho~|^2 via the delta method on the two components
    p_mc = re.mean**2 + im.mean**2
    se_p = 2 * np.sqrt((re.mean * re.stderr) ** 2 + (im.mean * im.stderr) ** 2)
    z_p = np.abs(np.abs(ff) ** 2 - p_mc) / se_p
    assert z_re.max() < 4 and z_im.max() < 4
    assert np.mean(z_p < 3) >= 0.95, z_p
