import math

import numpy as np
import pytest

from wmcoherence.model import (
    HarmonicSurface,
    PhasePoint,
    TwoStateSystem,
    average_potential,
    classical_trajectory,
    difference_frequency,
    surface_potential,
)


def test_surface_potential_examples(system):
    assert surface_potential(system.surface1, 0.0) == 0.0
    assert surface_potential(system.surface2, 1.0) == pytest.approx(0.1, abs=1e-15)
    assert surface_potential(system.surface2, 0.0) == pytest.approx(0.116, abs=1e-15)


@pytest.mark.parametrize("kwargs", [
    dict(mass=0.0, freq=0.01),
    dict(mass=2000.0, freq=-0.01),
    dict(mass=2000.0, freq=0.01, q_eq=math.nan),
    dict(mass=math.inf, freq=0.01),
])
def test_surface_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        HarmonicSurface(**kwargs)


def test_system_invariants():
    with pytest.raises(ValueError):
        TwoStateSystem(HarmonicSurface(2000.0, 0.01), HarmonicSurface(1000.0, 0.01))
    with pytest.raises(ValueError):
        TwoStateSystem(HarmonicSurface(2000.0, 0.01), HarmonicSurface(2000.0, 0.01), hbar=0.0)


def test_system_dict_roundtrip(system):
    again = TwoStateSystem.from_dict(system.to_dict())
    assert again == system


def test_average_potential(system):
    u0, du0, d2u0, om0, q0 = average_potential(system, 0.0)
    assert om0 == pytest.approx(math.sqrt((0.01**2 + 0.004**2) / 2), rel=1e-15)
    assert om0 == pytest.approx(0.0076, abs=5e-5)
    assert q0 == pytest.approx(0.004**2 / (0.01**2 + 0.004**2), rel=1e-14)
    assert q0 == pytest.approx(0.1379, abs=1e-4)
    # the minimum and curvature of the summed quadratic
    assert abs(average_potential(system, q0)[1]) < 1e-12
    assert d2u0 == pytest.approx(system.mass * om0**2, rel=1e-14)


def test_average_potential_identical(identical):
    *_, om0, q0 = average_potential(identical, 0.3)
    assert om0 == pytest.approx(0.01, rel=1e-15)
    assert q0 == 0.0


def test_difference_frequency(system, identical):
    w, _, w2 = difference_frequency(system, 0.0)
    assert w == pytest.approx(-0.116, abs=1e-15)
    assert w2 == pytest.approx(0.168, rel=1e-14)
    qs = np.linspace(-2, 3, 11)
    assert len({difference_frequency(system, q)[2] for q in qs}) == 1
    w, w1, w2 = difference_frequency(identical, np.linspace(-1, 1, 5))
    np.testing.assert_allclose(w, -0.1, atol=1e-16)
    assert np.all(w1 == 0) and w2 == 0


def test_dw_matches_finite_difference(system):
    h = 1e-5
    for q in (-0.5, 0.2, 1.7):
        fd = (difference_frequency(system, q + h)[0] - difference_frequency(system, q - h)[0]) / (2 * h)
        assert difference_frequency(system, q)[1] == pytest.approx(fd, rel=1e-8)


def test_trajectory_examples(system):
    s2 = system.surface2
    q, p = classical_trajectory(s2, 0.0, 0.0, math.pi / s2.freq)
    assert (q, p) == pytest.approx((2.0, 0.0), abs=1e-12)
    q, p = classical_trajectory(s2, 0.0, 0.0, math.pi / (2 * s2.freq))
    assert (q, p) == pytest.approx((1.0, 8.0), abs=1e-12)
    pt = classical_trajectory(s2, 1.0, 0.0, 123.4)
    assert isinstance(pt, PhasePoint)
    assert pt == (1.0, 0.0)


@pytest.mark.parametrize("which", [0, 1])
def test_energy_and_periodicity(system, which):
    s = (system.surface1, system.surface2)[which]
    q0, p0 = 0.37, -5.0
    e0 = s.energy_at(q0, p0)
    t = np.linspace(0.0, 10 * s.period, 2001)
    q, p = classical_trajectory(s, q0, p0, t)
    assert np.max(np.abs(s.energy_at(q, p) - e0)) < 1e-12 * abs(e0)
    q2, p2 = classical_trajectory(s, q0, p0, t + s.period)
    assert np.max(np.abs(q2 - q)) < 1e-10
    assert np.max(np.abs(p2 - p)) < 1e-10
