import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wmcoherence import gaussian
from wmcoherence.model import HarmonicSurface
from wmcoherence.oracle import (
    ThawedGaussian,
    coherence_at,
    correlation,
    cross_wigner,
    ground_wavepacket,
    normalized_gamma,
    overlap,
    packet_pair,
    propagate_thawed,
)


def test_ground_wavepacket(system):
    psi = ground_wavepacket(system.surface1)
    assert psi.alpha == 10j
    assert (psi.qc, psi.pc) == (0.0, 0.0)
    assert overlap(psi, psi) == pytest.approx(1.0, abs=1e-15)
    # numerical norm on a fine grid
    q = np.linspace(-2, 2, 4001)
    assert np.trapezoid(np.abs(psi(q)) ** 2, q) == pytest.approx(1.0, abs=1e-12)


def test_width_must_be_square_integrable():
    with pytest.raises(ValueError):
        ThawedGaussian(1.0 - 0.1j, 0.0, 0.0, 0.0)


def test_stationary_width(system):
    s = system.surface1
    psi = ground_wavepacket(s)
    for t in (13.0, 400.0, 2 * s.period + 1.0):
        assert propagate_thawed(s, psi, t).alpha == pytest.approx(psi.alpha, abs=1e-12)
    assert propagate_thawed(s, psi, 0.0) is psi


def test_full_period_on_upper_surface(system):
    psi0 = ground_wavepacket(system.surface1)
    psi = propagate_thawed(system.surface2, psi0, system.surface2.period)
    assert (psi.qc, psi.pc) == pytest.approx((0.0, 0.0), abs=1e-10)
    assert psi.alpha == pytest.approx(10j, abs=1e-10)


def test_norm_conserved_ten_periods(system):
    s = system.surface2
    psi0 = ground_wavepacket(system.surface1)
    for t in np.linspace(0.0, 10 * s.period, 37):
        psi = propagate_thawed(s, psi0, t)
        assert abs(overlap(psi, psi) - 1.0) < 1e-10


def test_alpha_half_period(system):
    s = system.surface2
    psi0 = ground_wavepacket(system.surface1)
    for t in (37.0, 500.0, 901.0):
        a1 = propagate_thawed(s, psi0, t).alpha
        a2 = propagate_thawed(s, psi0, t + s.period / 2).alpha
        assert abs(a1 - a2) < 1e-10


def test_schrodinger_equation_numerically(system):
    # i hbar dpsi/dt = H psi checked by finite differences in t and q
    s = system.surface2
    psi0 = ground_wavepacket(system.surface1)
    t, dt, h = 333.0, 1e-3, 1e-3
    q = np.linspace(-0.5, 1.5, 9)
    dpsi = (propagate_thawed(s, psi0, t + dt)(q) - propagate_thawed(s, psi0, t - dt)(q)) / (2 * dt)
    f = propagate_thawed(s, psi0, t)
    lap = (f(q + h) - 2 * f(q) + f(q - h)) / h**2
    hpsi = -lap / (2 * s.mass) + (0.5 * s.mass * s.freq**2 * (q - s.q_eq) ** 2 + s.energy) * f(q)
    np.testing.assert_allclose(1j * dpsi, hpsi, rtol=0, atol=2e-5 * np.max(np.abs(hpsi)))


def test_overlap_examples(system):
    psi = ground_wavepacket(system.surface1)
    mags = []
    for d in (0.5, 1.0, 2.0, 4.0):
        other = ThawedGaussian(psi.alpha, d, 0.0, psi.gamma)
        mags.append(abs(overlap(psi, other)))
        # equal widths: |<psi|psi_d>| = exp(-m omega d^2 / 4 hbar)
        assert mags[-1] == pytest.approx(math.exp(-5.0 * d * d), rel=1e-12)
    psi1, psi2 = packet_pair(system, system.surface2.period)
    assert abs(abs(overlap(psi2, psi1)) - 1.0) < 1e-10


def test_overlap_convention_is_bra_first():
    a = ThawedGaussian(1j, 0.0, 0.3, 0.0)
    b = ThawedGaussian(2j, 0.1, -0.2, 0.1j)
    q = np.linspace(-8, 8, 20001)
    num = np.trapezoid(np.conj(a(q)) * b(q), q)
    assert overlap(a, b) == pytest.approx(num, abs=1e-12)
    assert overlap(b, a) == pytest.approx(np.conj(num), abs=1e-12)


def test_cross_wigner_of_pure_state_is_real_on_center_line():
    psi = ThawedGaussian(0.4 + 2j, 0.3, 1.5, normalized_gamma(0.4 + 2j))
    w = cross_wigner(psi, psi)
    q = np.linspace(-1, 1, 11) + 0.3
    vals = gaussian.evaluate(w, q, 1.5 + 0.2 * (q - 0.3))
    assert np.max(np.abs(vals.imag)) < 1e-14 * np.max(np.abs(vals))
    assert np.all(vals.real >= 0)


def test_cross_wigner_by_quadrature():
    # direct y-integral of psi1(q + y/2) conj(psi2(q - y/2)) exp(-i p y) / 2pi
    psi1 = ThawedGaussian(0.5 + 3j, 0.2, 1.0, 0.1 + 0.05j)
    psi2 = ThawedGaussian(-0.3 + 1j, -0.4, -2.0, -0.2 + 0.1j)
    w = cross_wigner(psi1, psi2)
    y = np.linspace(-12, 12, 24001)
    for q, p in ((0.0, 0.0), (-0.3, 1.1), (0.4, -2.0)):
        f = psi1(q + y / 2) * np.conj(psi2(q - y / 2)) * np.exp(-1j * p * y)
        num = np.trapezoid(f, y) / (2 * math.pi)
        assert gaussian.evaluate(w, q, p) == pytest.approx(num, rel=1e-9, abs=1e-14)


@st.composite
def packets(draw):
    re = draw(st.floats(-2.0, 2.0))
    im = draw(st.floats(0.3, 5.0))
    alpha = complex(re, im)
    return ThawedGaussian(alpha, draw(st.floats(-1.0, 1.0)), draw(st.floats(-3.0, 3.0)),
                          normalized_gamma(alpha) + draw(st.floats(-1.0, 1.0)))


@settings(max_examples=100, deadline=None)
@given(packets(), packets())
def test_trace_of_cross_wigner_is_overlap(psi1, psi2):
    ref = overlap(psi2, psi1)
    w = cross_wigner(psi1, psi2)
    if abs(ref) < 1e-200:
        return
    assert abs(gaussian.trace(w) - ref) <= 1e-12 * max(abs(ref), 1e-300) + 1e-300


def test_coherence_at_zero_is_ground_state(system):
    g = coherence_at(system, 0.0)
    ref = gaussian.ground_state_coherence(system)
    for name in ("a", "b", "c", "u", "v", "w"):
        assert getattr(g, name) == pytest.approx(getattr(ref, name), abs=1e-13)


def test_correlation_recurrence(system):
    T2 = system.surface2.period
    c = correlation(system, [0.0, T2, 2 * T2, 0.5 * T2])
    assert c[0] == pytest.approx(1.0, abs=1e-14)
    assert abs(abs(c[1]) - 1) < 1e-10 and abs(abs(c[2]) - 1) < 1e-10
    assert abs(c[3]) < 1e-3


def test_harmonic_surface_identity(identical):
    s1, s2 = identical.surface1, identical.surface2
    psi = ground_wavepacket(s1)
    for t in (10.0, 1234.5):
        p1, p2 = propagate_thawed(s1, psi, t), propagate_thawed(s2, psi, t)
        assert overlap(p2, p1) == pytest.approx(cmath.exp(1j * 0.1 * t), abs=1e-12)


def test_displaced_start():
    s = HarmonicSurface(2000.0, 0.004, 1.0, 0.1)
    psi0 = ThawedGaussian(10j, 0.3, 2.0, normalized_gamma(10j))
    psi = propagate_thawed(s, psi0, 5 * s.period)
    assert (psi.qc, psi.pc) == pytest.approx((0.3, 2.0), abs=1e-9)
    assert abs(overlap(psi0, psi)) == pytest.approx(1.0, abs=1e-10)
