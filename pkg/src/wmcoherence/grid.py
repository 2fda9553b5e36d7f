"""Method-of-lines propagation of the coherence on a phase-space lattice.

    d rho/dt = -(p/m) d rho/dq + U0'(q) d rho/dp - i omega(q) rho
               + (i hbar^2 omega''/8) d^2 rho/dp^2     (exact only)

All derivatives are central differences: eighth order by default, or
fourth order for the first derivatives with second order for d2/dp2.
The outermost r = order/2 nodes on each side are held at their initial
values; runs are meaningful only while the field there stays negligible,
which ``boundary_ratio`` tracks. Time stepping is classical RK4.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from . import gaussian
from .dynamics import Method
from .model import TwoStateSystem, average_potential, difference_frequency

BOUNDARY_TOL = 1e-8
# a run is trusted only while the field near the fixed ring stays below this
VALID_BOUNDARY = 1e-6
# (first-derivative order, second p-derivative order)
DEFAULT_ORDERS = (8, 8)
STENCIL_ORDERS = ((8, 8), (4, 2))
GROWTH_LIMIT = 1e3


class DomainTooSmall(ValueError):
    pass


class Unstable(ArithmeticError):
    pass


@dataclass(frozen=True)
class GridSpec:
    q_min: float = -1.75
    q_max: float = 2.75
    p_min: float = -40.0
    p_max: float = 40.0
    nq: int = 512
    np_: int = 512

    def __post_init__(self):
        for n in (self.nq, self.np_):
            if n < 64 or n % 2:
                raise ValueError("grid sizes must be even and at least 64")
        if not (self.q_max > self.q_min and self.p_max > self.p_min):
            raise ValueError("empty grid bounds")

    @property
    def q(self):
        return np.linspace(self.q_min, self.q_max, self.nq)

    @property
    def p(self):
        return np.linspace(self.p_min, self.p_max, self.np_)

    @property
    def dq(self):
        return (self.q_max - self.q_min) / (self.nq - 1)

    @property
    def dp(self):
        return (self.p_max - self.p_min) / (self.np_ - 1)

    def to_dict(self):
        return {"q_min": self.q_min, "q_max": self.q_max, "p_min": self.p_min,
                "p_max": self.p_max, "nq": self.nq, "np": self.np_}


@dataclass
class PhaseSpaceGrid:
    spec: GridSpec
    field: np.ndarray  # shape (nq, np), axis 0 is q
    t: float = 0.0
    method: str = "moyal"
    meta: dict = field(default_factory=dict)

    @property
    def q(self):
        return self.spec.q

    @property
    def p(self):
        return self.spec.p

    def boundary_ratio(self) -> float:
        return boundary_ratio(self.field)

    def to_csv(self, path):
        q, p = self.q, self.p
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(("q", "p", "Re rho", "Im rho"))
            for i in range(len(q)):
                for j in range(len(p)):
                    z = self.field[i, j]
                    wr.writerow([f"{x:.17g}" for x in (q[i], p[j], z.real, z.imag)])

    def write_sidecar(self, path, sys: TwoStateSystem | None = None):
        doc = {"bounds": self.spec.to_dict(), "t": self.t, "method": self.method}
        if sys is not None:
            doc["system"] = sys.to_dict()
        doc.update(self.meta)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)


def boundary_ratio(f: np.ndarray, width: int = 1) -> float:
    """Largest magnitude on the outer ``width`` layers relative to the maximum."""
    a = np.abs(f)
    top = a.max()
    if top == 0:
        return 0.0
    w = width
    ring = max(a[:w].max(), a[-w:].max(), a[:, :w].max(), a[:, -w:].max())
    return float(ring / top)


def discretize(g: gaussian.GaussianCoherence, spec: GridSpec, tol: float = BOUNDARY_TOL) -> PhaseSpaceGrid:
    """Sample the Gaussian on the lattice; refuses domains that clip it."""
    if not g.is_normalizable():
        raise gaussian.NonNormalizable("cannot discretize a non-normalizable state")
    qq, pp = np.meshgrid(spec.q, spec.p, indexing="ij")
    f = gaussian.evaluate(g, qq, pp)
    ratio = boundary_ratio(f)
    if not ratio < tol:
        raise DomainTooSmall(f"boundary magnitude ratio {ratio:.3g} exceeds {tol:g}")
    return PhaseSpaceGrid(spec, np.ascontiguousarray(f, dtype=np.complex128))


def grid_trace(grid: PhaseSpaceGrid) -> complex:
    """Two-dimensional trapezoid rule."""
    inner = np.trapezoid(grid.field, dx=grid.spec.dp, axis=1)
    return complex(np.trapezoid(inner, dx=grid.spec.dq))


@numba.njit(cache=True, fastmath=True)
def _row_4_2(fr, fi, kr, ki, i, vel, F, ph, kappa, dq, dp):
    # fourth-order first derivatives, second-order d2/dp2; row views with
    # non-negative offsets (j = jj + 2) let the loop vectorize
    iq = 1.0 / (12.0 * dq)
    ip = 1.0 / (12.0 * dp)
    ipp = 1.0 / (dp * dp)
    ra2, ra1, r0, rb1, rb2 = fr[i - 2], fr[i - 1], fr[i], fr[i + 1], fr[i + 2]
    ia2, ia1, i0, ib1, ib2 = fi[i - 2], fi[i - 1], fi[i], fi[i + 1], fi[i + 2]
    okr, oki = kr[i], ki[i]
    for jj in range(fr.shape[1] - 4):
        j = jj + 2
        v = vel[j]
        qr = (ra2[j] - rb2[j] + 8.0 * (rb1[j] - ra1[j])) * iq
        qi = (ia2[j] - ib2[j] + 8.0 * (ib1[j] - ia1[j])) * iq
        pr = (r0[jj] - r0[jj + 4] + 8.0 * (r0[jj + 3] - r0[jj + 1])) * ip
        pi_ = (i0[jj] - i0[jj + 4] + 8.0 * (i0[jj + 3] - i0[jj + 1])) * ip
        ppr = (r0[jj + 1] - 2.0 * r0[j] + r0[jj + 3]) * ipp
        ppi = (i0[jj + 1] - 2.0 * i0[j] + i0[jj + 3]) * ipp
        okr[j] = -v * qr + F * pr + ph * i0[j] - kappa * ppi
        oki[j] = -v * qi + F * pi_ - ph * r0[j] + kappa * ppr


# eighth-order central weights
_A1, _A2, _A3, _A4 = 0.8, -0.2, 4.0 / 105.0, -1.0 / 280.0
_B0, _B1, _B2, _B3, _B4 = -205.0 / 72.0, 1.6, -0.2, 8.0 / 315.0, -1.0 / 560.0


@numba.njit(cache=True, fastmath=True)
def _row_8_8(fr, fi, kr, ki, i, vel, F, ph, kappa, dq, dp):
    # same layout as _row_4_2 with j = jj + 4
    q1, q2, q3, q4 = _A1 / dq, _A2 / dq, _A3 / dq, _A4 / dq
    p1, p2, p3, p4 = F * _A1 / dp, F * _A2 / dp, F * _A3 / dp, F * _A4 / dp
    k2 = kappa / (dp * dp)
    s0, s1, s2, s3, s4 = k2 * _B0, k2 * _B1, k2 * _B2, k2 * _B3, k2 * _B4
    ra4, ra3, ra2, ra1 = fr[i - 4], fr[i - 3], fr[i - 2], fr[i - 1]
    rb1, rb2, rb3, rb4 = fr[i + 1], fr[i + 2], fr[i + 3], fr[i + 4]
    ia4, ia3, ia2, ia1 = fi[i - 4], fi[i - 3], fi[i - 2], fi[i - 1]
    ib1, ib2, ib3, ib4 = fi[i + 1], fi[i + 2], fi[i + 3], fi[i + 4]
    r0, i0 = fr[i], fi[i]
    okr, oki = kr[i], ki[i]
    for jj in range(fr.shape[1] - 8):
        j = jj + 4
        v = vel[j]
        qr = (q1 * (rb1[j] - ra1[j]) + q2 * (rb2[j] - ra2[j])
              + q3 * (rb3[j] - ra3[j]) + q4 * (rb4[j] - ra4[j]))
        qi = (q1 * (ib1[j] - ia1[j]) + q2 * (ib2[j] - ia2[j])
              + q3 * (ib3[j] - ia3[j]) + q4 * (ib4[j] - ia4[j]))
        pr = (p1 * (r0[jj + 5] - r0[jj + 3]) + p2 * (r0[jj + 6] - r0[jj + 2])
              + p3 * (r0[jj + 7] - r0[jj + 1]) + p4 * (r0[jj + 8] - r0[jj]))
        pi_ = (p1 * (i0[jj + 5] - i0[jj + 3]) + p2 * (i0[jj + 6] - i0[jj + 2])
               + p3 * (i0[jj + 7] - i0[jj + 1]) + p4 * (i0[jj + 8] - i0[jj]))
        ppr = (s0 * r0[j] + s1 * (r0[jj + 5] + r0[jj + 3]) + s2 * (r0[jj + 6] + r0[jj + 2])
               + s3 * (r0[jj + 7] + r0[jj + 1]) + s4 * (r0[jj + 8] + r0[jj]))
        ppi = (s0 * i0[j] + s1 * (i0[jj + 5] + i0[jj + 3]) + s2 * (i0[jj + 6] + i0[jj + 2])
               + s3 * (i0[jj + 7] + i0[jj + 1]) + s4 * (i0[jj + 8] + i0[jj]))
        okr[j] = -v * qr + pr + ph * i0[j] - ppi
        oki[j] = -v * qi + pi_ - ph * r0[j] + ppr


def _make_stage_kernel(parallel: bool):
    loop = numba.prange if parallel else range

    # The field is split into real and imaginary planes. With
    # L f = -v df/dq + F df/dp - i phase f + i kappa d2f/dp2:
    #   Re L f = -v dfr/dq + F dfr/dp + phase fi - kappa d2fi/dp2
    #   Im L f = -v dfi/dq + F dfi/dp - phase fr + kappa d2fr/dp2
    # The outer r nodes on every side are held fixed (zero rate).
    @numba.njit(parallel=parallel, cache=True, fastmath=True)
    def stage(fr, fi, kr, ki, yr, yi, dr, di, a, high, vel, force, phase, kappa, dq, dp):
        # k = L f; d = y + a k unless a == 0
        nq, np_ = fr.shape
        r = 4 if high else 2
        for i in loop(nq):
            if i < r or i >= nq - r:
                for j in range(np_):
                    kr[i, j] = 0.0
                    ki[i, j] = 0.0
            else:
                if high:
                    _row_8_8(fr, fi, kr, ki, i, vel, force[i], phase[i], kappa, dq, dp)
                else:
                    _row_4_2(fr, fi, kr, ki, i, vel, force[i], phase[i], kappa, dq, dp)
                for j in range(r):
                    kr[i, j] = 0.0
                    ki[i, j] = 0.0
                    kr[i, np_ - 1 - j] = 0.0
                    ki[i, np_ - 1 - j] = 0.0
            if a != 0.0:
                for j in range(np_):
                    dr[i, j] = yr[i, j] + a * kr[i, j]
                    di[i, j] = yi[i, j] + a * ki[i, j]

    return stage


_stage_serial = _make_stage_kernel(False)
_stage_parallel = _make_stage_kernel(True)


@numba.njit(cache=True, fastmath=True)
def _rk4_combine(yr, yi, dt, k1r, k1i, k2r, k2i, k3r, k3i, k4r, k4i):
    nq, np_ = yr.shape
    s = dt / 6.0
    for i in range(nq):
        for j in range(np_):
            yr[i, j] += s * (k1r[i, j] + 2.0 * (k2r[i, j] + k3r[i, j]) + k4r[i, j])
            yi[i, j] += s * (k1i[i, j] + 2.0 * (k2i[i, j] + k3i[i, j]) + k4i[i, j])


class _Operator:
    def __init__(self, spec: GridSpec, sys: TwoStateSystem, method, parallel: bool = False,
                 orders=DEFAULT_ORDERS):
        method = Method.parse(method)
        if method is Method.SEMICLASSICAL_LINEARIZED:
            raise ValueError("the linearized variant exists only for the Gaussian parameters")
        orders = tuple(int(o) for o in orders)
        if orders not in STENCIL_ORDERS:
            raise ValueError(f"stencil orders must be one of {STENCIL_ORDERS}, got {orders!r}")
        self.method = method
        self.orders = orders
        self.high = orders == (8, 8)
        self.r = 4 if self.high else 2
        q, p = spec.q, spec.p
        self.vel = p / sys.mass
        self.force = np.ascontiguousarray(average_potential(sys, q)[1] * np.ones_like(q))
        self.phase = np.ascontiguousarray(difference_frequency(sys, q)[0] * np.ones_like(q))
        # the Moyal term is i*kappa*d2/dp2
        self.kappa = 0.125 * sys.hbar**2 * sys.omega_pp if method is Method.MOYAL_EXACT else 0.0
        self.kernel = _stage_parallel if parallel else _stage_serial
        self.spec = spec
        self.sys = sys

    def stage(self, f, k, y, dst, a):
        self.kernel(f[0], f[1], k[0], k[1], y[0], y[1], dst[0], dst[1], a, self.high,
                    self.vel, self.force, self.phase, self.kappa, self.spec.dq, self.spec.dp)

    def apply(self, field: np.ndarray) -> np.ndarray:
        f = _split(field)
        k = np.empty_like(f)
        self.stage(f, k, f, f, 0.0)
        return k[0] + 1j * k[1]

    def stable_dt(self) -> float:
        spec, sys = self.spec, self.sys
        pmax = max(abs(spec.p_min), abs(spec.p_max))
        bounds = [spec.dq * sys.mass / pmax]
        fmax = np.max(np.abs(self.force))
        if fmax > 0:
            bounds.append(spec.dp / fmax)
        if self.kappa != 0:
            bounds.append(4.0 * spec.dp**2 / (sys.hbar**2 * abs(sys.omega_pp)))
        return 0.5 * min(bounds)


def _split(field: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.stack([field.real, field.imag]))


def pde_rhs(grid: PhaseSpaceGrid, sys: TwoStateSystem, method, parallel: bool = False,
            orders=DEFAULT_ORDERS) -> np.ndarray:
    """Time derivative of the sampled field (zero on the fixed outer ring)."""
    return _Operator(grid.spec, sys, method, parallel, orders).apply(grid.field)


def stable_dt(spec: GridSpec, sys: TwoStateSystem, method) -> float:
    """Half the tightest of the advective and dispersive step bounds."""
    return _Operator(spec, sys, method).stable_dt()


def propagate_grid(grid0: PhaseSpaceGrid, sys: TwoStateSystem, dt: float | None, nsteps: int, method,
                   every: int = 1, parallel: bool = False, callback=None,
                   orders=DEFAULT_ORDERS) -> list:
    """RK4 method of lines; returns snapshots at steps 0, every, 2*every, ...
    and at the final step.

    ``callback(snapshot)``, when given, receives each snapshot instead of it
    being stored (the returned list then holds only the last one).
    Raises Unstable if max|rho| exceeds GROWTH_LIMIT times its initial value.
    """
    op = _Operator(grid0.spec, sys, method, parallel, orders)
    if dt is None:
        dt = op.stable_dt()
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError("dt must be positive")
    if nsteps < 0 or every < 1:
        raise ValueError("nsteps must be >= 0 and every >= 1")
    y = _split(grid0.field)
    start = float(np.max(np.abs(grid0.field)))
    k1, k2, k3, k4, tmp, tmp2 = (np.empty_like(y) for _ in range(6))
    meta = {"dt": dt, "parallel": parallel, "orders": list(op.orders)}

    def snap(n, f):
        return PhaseSpaceGrid(grid0.spec, f, grid0.t + n * dt, op.method.value,
                              {**meta, "boundary_ratio": boundary_ratio(f, op.r + 1)})

    first = snap(0, grid0.field.copy())
    out = [first]
    if callback is not None:
        callback(first)
    for n in range(1, nsteps + 1):
        op.stage(y, k1, y, tmp, 0.5 * dt)
        op.stage(tmp, k2, y, tmp2, 0.5 * dt)
        op.stage(tmp2, k3, y, tmp, dt)
        op.stage(tmp, k4, tmp, tmp, 0.0)
        _rk4_combine(y[0], y[1], dt, k1[0], k1[1], k2[0], k2[1], k3[0], k3[1], k4[0], k4[1])
        if n % every == 0 or n == nsteps:
            f = y[0] + 1j * y[1]
            peak = float(np.max(np.abs(f)))
            if not math.isfinite(peak) or peak > GROWTH_LIMIT * start:
                raise Unstable(f"field grew to {peak:.3g} (initial {start:.3g}) at t={grid0.t + n * dt:g}")
            s = snap(n, f)
            if callback is not None:
                callback(s)
                out = [s]
            else:
                out.append(s)
    return out


def grid_correlation(grid0: PhaseSpaceGrid, sys: TwoStateSystem, dt: float | None, nsteps: int, method,
                     every: int = 1, parallel: bool = False, orders=DEFAULT_ORDERS):
    """Trace of the field every ``every`` steps, without keeping snapshots.

    Returns (times, traces, last snapshot, worst boundary ratio).
    """
    times, vals = [], []
    worst = [0.0]

    def record(s):
        times.append(s.t)
        vals.append(grid_trace(s))
        worst[0] = max(worst[0], s.meta["boundary_ratio"])

    last = propagate_grid(grid0, sys, dt, nsteps, method, every, parallel, callback=record,
                          orders=orders)[-1]
    return np.array(times), np.array(vals), last, worst[0]
