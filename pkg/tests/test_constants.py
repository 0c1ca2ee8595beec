import dataclasses
import threading

import pytest

from cslbounds.constants import PhysicalConstants, constants, with_overrides


def test_codata_values():
    c = constants()
    assert c.hbar == 1.054571817e-34
    assert c.k_B == 1.380649e-23
    assert c.m_nucleon == pytest.approx(1.67492749e-27, rel=1e-8)
    assert c.G == 6.67430e-11


def test_all_positive():
    c = constants()
    for f in dataclasses.fields(c):
        assert getattr(c, f.name) > 0


def test_immutable_and_identical():
    a, b = constants(), constants()
    assert a == b
    with pytest.raises(dataclasses.FrozenInstanceError):
        a.hbar = 1.0


def test_identical_across_threads():
    seen = []
    ts = [threading.Thread(target=lambda: seen.append(constants())) for _ in range(8)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert all(s == constants() for s in seen)


def test_overrides():
    c = with_overrides(m_nucleon=1.67262192e-27)
    assert c.m_nucleon == 1.67262192e-27
    assert c.hbar == constants().hbar
    with pytest.raises((TypeError, ValueError)):
        with_overrides(hbar=-1.0)
    with pytest.raises((TypeError, ValueError)):
        with_overrides(planck=1.0)
    assert isinstance(c, PhysicalConstants)
