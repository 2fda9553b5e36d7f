import json
import math

import numpy as np
import pytest

from wmcoherence import oracle
from wmcoherence.dynamics import analytic_semiclassical_center, exact_rhs, propagate
from wmcoherence.gaussian import evaluate, ground_state_coherence, trace
from wmcoherence.grid import (
    DomainTooSmall,
    GridSpec,
    PhaseSpaceGrid,
    Unstable,
    discretize,
    grid_correlation,
    grid_trace,
    pde_rhs,
    propagate_grid,
    stable_dt,
)
from wmcoherence.cli import p_stencil_ratios


def _gaussian_rhs(st, sys, spec):
    rate = exact_rhs(st, sys)
    q, p = spec.q[:, None], spec.p[None, :]
    x, y = q - st.Q, p - st.P
    dlog = (-rate.a * x * x - rate.b * y * y + rate.c * x * y + rate.u * x + rate.v * y + rate.w
            - rate.Q * (-2.0 * st.a * x + st.c * y + st.u)
            - rate.P * (-2.0 * st.b * y + st.c * x + st.v))
    return dlog * evaluate(st, q, p)


def test_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(nq=63)
    with pytest.raises(ValueError):
        GridSpec(q_min=1.0, q_max=0.0)
    spec = GridSpec()
    assert spec.q[0] == -1.75 and spec.q[-1] == 2.75 and len(spec.p) == 512
    assert spec.dq == pytest.approx(4.5 / 511)


def test_discretize_and_trace(system):
    spec = GridSpec(q_min=-1.0, q_max=3.0, nq=256, np_=256)
    g = ground_state_coherence(system)
    grid = discretize(g, spec)
    # nodes hold the exact values
    assert grid.field[37, 100] == evaluate(g, spec.q[37], spec.p[100])
    assert abs(grid_trace(grid) - 1.0) < 1e-6
    st = oracle.coherence_at(system, 0.1 * system.surface2.period)
    g2 = discretize(st, GridSpec(nq=256, np_=256))
    assert abs(grid_trace(g2) - trace(st)) < 1e-6


def test_domain_too_small(system):
    with pytest.raises(DomainTooSmall):
        discretize(ground_state_coherence(system), GridSpec(q_min=-0.2, q_max=0.2))


def test_trace_is_linear(system):
    spec = GridSpec(nq=128, np_=128)
    zero = PhaseSpaceGrid(spec, np.zeros((128, 128), complex))
    assert grid_trace(zero) == 0
    f = discretize(ground_state_coherence(system), spec).field
    s = 0.3 - 2j
    lhs = grid_trace(PhaseSpaceGrid(spec, s * f + f))
    assert lhs == pytest.approx((1 + s) * grid_trace(PhaseSpaceGrid(spec, f)), rel=1e-14)


def test_identical_surfaces_rhs_is_rotation(identical):
    # the ground state is stationary up to the electronic phase
    spec = GridSpec(q_min=-1.0, q_max=1.0, nq=256, np_=256)
    grid = discretize(ground_state_coherence(identical), spec)
    for method in ("moyal", "sc"):
        rhs = pde_rhs(grid, identical, method)
        ref = 0.1j * grid.field
        ref[:4], ref[-4:], ref[:, :4], ref[:, -4:] = 0, 0, 0, 0
        assert np.max(np.abs(rhs - ref)) < 1e-9 * np.max(np.abs(ref))


def test_rhs_matches_gaussian_rates(system):
    st = oracle.coherence_at(system, 500.0)
    spec = GridSpec()
    rhs = pde_rhs(discretize(st, spec), system, "moyal")
    ref = _gaussian_rhs(st, system, spec)
    assert np.max(np.abs(rhs - ref)[4:-4, 4:-4]) < 1e-5 * np.max(np.abs(ref))


def test_p_stencil_second_order(system):
    # halving Delta p cuts the (4, 2) rhs error about four times
    ratios = p_stencil_ratios(system)
    assert 3.5 <= ratios[-1] <= 4.5


def test_bad_arguments(system):
    grid = discretize(ground_state_coherence(system), GridSpec(nq=128, np_=128))
    with pytest.raises(ValueError):
        propagate_grid(grid, system, 0.1, 1, "sc-linearized")
    with pytest.raises(ValueError):
        propagate_grid(grid, system, 0.1, 1, "moyal", orders=(6, 6))
    with pytest.raises(ValueError):
        propagate_grid(grid, system, -0.1, 1, "moyal")
    out = propagate_grid(grid, system, 0.1, 0, "moyal")
    assert len(out) == 1 and np.array_equal(out[0].field, grid.field)


def test_unstable(system):
    grid = discretize(ground_state_coherence(system), GridSpec(nq=128, np_=128))
    dt = 20 * stable_dt(grid.spec, system, "moyal")
    with pytest.raises(Unstable):
        propagate_grid(grid, system, dt, 2000, "moyal", every=10)


def test_field_error_at_100(system):
    spec = GridSpec()
    grid = discretize(ground_state_coherence(system), spec)
    dt = stable_dt(spec, system, "moyal")
    n = int(math.ceil(100.0 / dt))
    last = propagate_grid(grid, system, 100.0 / n, n, "moyal", every=n)[-1]
    ref = evaluate(oracle.coherence_at(system, 100.0), spec.q[:, None], spec.p[None, :])
    assert last.t == pytest.approx(100.0)
    assert np.max(np.abs(last.field - ref)) < 1e-4 * np.max(np.abs(ref))


def test_identical_surfaces_run(identical):
    spec = GridSpec(q_min=-1.0, q_max=1.0, nq=256, np_=256)
    grid = discretize(ground_state_coherence(identical), spec)
    t, c, last, worst = grid_correlation(grid, identical, None, 400, "moyal", every=20)
    assert np.ptp(np.abs(c)) < 1e-6
    assert np.max(np.abs(c - np.exp(0.1j * t))) < 1e-6
    assert worst < 1e-6


def test_parallel_matches_serial_and_reruns(system):
    grid = discretize(ground_state_coherence(system), GridSpec(nq=256, np_=256))
    a = propagate_grid(grid, system, None, 200, "moyal", every=200)[-1].field
    b = propagate_grid(grid, system, None, 200, "moyal", every=200)[-1].field
    c = propagate_grid(grid, system, None, 200, "moyal", every=200, parallel=True)[-1].field
    assert np.array_equal(a, b)
    assert np.max(np.abs(a - c)) < 1e-12 * np.max(np.abs(a))


@pytest.mark.slow
def test_semiclassical_field_develops_oscillations(system):
    spec = GridSpec()
    grid = discretize(ground_state_coherence(system), spec)
    dt = stable_dt(spec, system, "sc")
    n = int(round(100.0 / dt))
    counts = {}

    def cb(s):
        k = int(round(s.t))
        if k in (100, 200, 400, 800):
            Q, _ = analytic_semiclassical_center(system, 0.0, 0.0, s.t)
            row = s.field[np.argmin(np.abs(spec.q - Q))]
            keep = np.abs(row) > 1e-6 * np.abs(row).max()
            counts[k] = int(np.sum(np.diff(np.sign(row.real[keep])) != 0))
            m = int(round(s.t / 0.5))
            st = propagate(ground_state_coherence(system), system, s.t / m, m, "sc").states[-1]
            ref = evaluate(st, spec.q[:, None], spec.p[None, :])
            assert np.max(np.abs(s.field - ref)) < 1e-6

    propagate_grid(grid, system, 100.0 / n, 8 * n, "sc", every=n, callback=cb)
    seq = [counts[k] for k in (100, 200, 400, 800)]
    assert all(x < y for x, y in zip(seq, seq[1:])), seq
    assert seq[-1] >= 20


def test_snapshot_output(system, tmp_path):
    spec = GridSpec(nq=64, np_=64, q_min=-1.2, q_max=1.2, p_min=-25, p_max=25)
    grid = discretize(ground_state_coherence(system), spec)
    last = propagate_grid(grid, system, None, 3, "moyal")[-1]
    last.to_csv(tmp_path / "f.csv")
    last.write_sidecar(tmp_path / "f.json", system)
    rows = np.loadtxt(tmp_path / "f.csv", delimiter=",", skiprows=1)
    assert rows.shape == (64 * 64, 4)
    np.testing.assert_array_equal(rows[:, 2] + 1j * rows[:, 3], last.field.ravel())
    doc = json.loads((tmp_path / "f.json").read_text())
    assert doc["bounds"]["nq"] == 64 and doc["t"] == last.t
    assert doc["orders"] == [8, 8] and doc["system"]["hbar"] == 1.0
