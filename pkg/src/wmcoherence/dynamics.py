"""Equations of motion for the Gaussian coherence parameters.

Substituting the Gaussian into

    d rho/dt = {H0, rho} - i omega(q) rho + k_m d^2 rho/dp^2,
    k_m = i hbar^2 omega'' / 8,

and matching powers of x = q - Q and y = p - P up to second order gives,
with the center following Qdot = P/m, Pdot = -U0'(Q) - 2 k_m v,

    udot = -i omega'(Q) + U0'' v          vdot = -u/m
    adot = -U0'' c + i omega''/2 - k_m c^2
    bdot = c/m - 4 k_m b^2
    cdot = 2a/m - 2 U0'' b - 4 k_m b c
    wdot = -i omega(Q) - k_m (2b + v^2)

The semiclassical limit sets k_m = 0. Its linearized variant also replaces
omega(q) by its tangent line at the initial center, so omega'' = 0.
"""

from __future__ import annotations

import cmath
import csv
import enum
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian import RECORD_COLUMNS, GaussianCoherence
from .model import (
    HarmonicSurface,
    TwoStateSystem,
    average_potential,
    classical_trajectory,
    difference_frequency,
)


# resolves the fast -i omega rho rotation (period about 60) with ~600 steps
DEFAULT_DT = 0.1


class Method(enum.Enum):
    MOYAL_EXACT = "moyal"
    SEMICLASSICAL = "sc"
    SEMICLASSICAL_LINEARIZED = "sc-linearized"

    @classmethod
    def parse(cls, value) -> "Method":
        if isinstance(value, cls):
            return value
        aliases = {"exact": "moyal", "semiclassical": "sc", "linearized": "sc-linearized"}
        return cls(aliases.get(value, value))


class InvalidStep(ValueError):
    pass


class DegenerateState(ArithmeticError):
    """A propagated state lost normalizability."""

    def __init__(self, msg, index=None, state=None):
        super().__init__(msg)
        self.index = index
        self.state = state


class _Coefficients:
    """Constant coefficients of the parameter equations for one run."""

    def __init__(self, sys: TwoStateSystem, method: Method, q_ref=None, moyal_scale=1.0):
        self.m = sys.mass
        _, _, self.d2u0, _, self.q_bar = average_potential(sys, 0.0)
        w0, w1, w2 = difference_frequency(sys, 0.0)
        self.w_center = 0.0
        if method is Method.MOYAL_EXACT:
            self.k = 0.125j * moyal_scale * sys.hbar**2 * sys.omega_pp
        else:
            self.k = 0j
        if method is Method.SEMICLASSICAL_LINEARIZED:
            if q_ref is None:
                raise ValueError("linearized propagation needs a reference position")
            w0, w1, _ = difference_frequency(sys, q_ref)
            w2 = 0.0
            self.w_center = float(q_ref)
        self.w0, self.w1, self.w2 = w0, w1, w2

    def rates(self, a, b, c, Q, P, u, v, w):
        m, k, d2u0 = self.m, self.k, self.d2u0
        x = Q - self.w_center
        om = self.w0 + self.w1 * x + 0.5 * self.w2 * x * x
        dom = self.w1 + self.w2 * x
        Qd = P / m
        Pd = -d2u0 * (Q - self.q_bar) - 2.0 * k * v
        ud = -1j * dom + d2u0 * v
        vd = -u / m
        ad = -d2u0 * c + 0.5j * self.w2 - k * c * c
        bd = c / m - 4.0 * k * b * b
        cd = 2.0 * a / m - 2.0 * d2u0 * b - 4.0 * k * b * c
        wd = -1j * om - k * (2.0 * b + v * v)
        # keep the center real: an imaginary center velocity is an equivalent
        # change of (u, v, w)
        Pd = complex(Pd)
        if Pd.imag != 0.0:
            s = 1j * Pd.imag
            ud -= c * s
            vd += 2.0 * b * s
            wd -= v * s
            Pd = Pd.real
        Qd = complex(Qd)
        if Qd.imag != 0.0:
            s = 1j * Qd.imag
            ud += 2.0 * a * s
            vd -= c * s
            wd -= u * s
            Qd = Qd.real
        return ad, bd, cd, Qd.real, float(Pd.real), ud, vd, wd


def _as_tuple(g: GaussianCoherence):
    return (g.a, g.b, g.c, g.Q, g.P, g.u, g.v, g.w)


def _as_state(y) -> GaussianCoherence:
    a, b, c, Q, P, u, v, w = y
    return GaussianCoherence(a, b, c, float(Q.real if isinstance(Q, complex) else Q),
                             float(P.real if isinstance(P, complex) else P), u, v, w)


def exact_rhs(g: GaussianCoherence, sys: TwoStateSystem, moyal_scale: float = 1.0) -> GaussianCoherence:
    """Time derivatives of all eight parameters under exact Moyal dynamics.

    The result is packed into a GaussianCoherence whose fields hold rates.
    ``moyal_scale`` multiplies the hbar^2 term (1 is exact, 0 semiclassical).
    """
    coef = _Coefficients(sys, Method.MOYAL_EXACT, moyal_scale=moyal_scale)
    return _as_state(coef.rates(*_as_tuple(g)))


def semiclassical_rhs(g: GaussianCoherence, sys: TwoStateSystem, linearized: bool = False,
                      q_ref: float | None = None) -> GaussianCoherence:
    """Rates in the semiclassical limit; ``q_ref`` defaults to g.Q."""
    if linearized:
        coef = _Coefficients(sys, Method.SEMICLASSICAL_LINEARIZED, g.Q if q_ref is None else q_ref)
    else:
        coef = _Coefficients(sys, Method.SEMICLASSICAL)
    return _as_state(coef.rates(*_as_tuple(g)))


def _rk4_increment(coef: _Coefficients, y, dt):
    f = coef.rates
    k1 = f(*y)
    k2 = f(*(yi + 0.5 * dt * ki for yi, ki in zip(y, k1)))
    k3 = f(*(yi + 0.5 * dt * ki for yi, ki in zip(y, k2)))
    k4 = f(*(yi + dt * ki for yi, ki in zip(y, k3)))
    return tuple(dt / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4) for r1, r2, r3, r4 in zip(k1, k2, k3, k4))


def _rk4(coef: _Coefficients, y, dt):
    return tuple(yi + di for yi, di in zip(y, _rk4_increment(coef, y, dt)))


def _check_dt(dt):
    if not math.isfinite(dt) or dt == 0.0:
        raise InvalidStep(f"time step must be finite and nonzero, got {dt}")


def step_rk4(g: GaussianCoherence, sys: TwoStateSystem, dt: float, method, q_ref: float | None = None,
             moyal_scale: float = 1.0) -> GaussianCoherence:
    """One classical Runge-Kutta step. Negative dt steps backwards."""
    _check_dt(dt)
    method = Method.parse(method)
    if method is Method.SEMICLASSICAL_LINEARIZED and q_ref is None:
        q_ref = g.Q
    coef = _Coefficients(sys, method, q_ref, moyal_scale)
    return _as_state(_rk4(coef, _as_tuple(g), dt))


@dataclass
class ParameterTrajectory:
    times: np.ndarray
    states: list
    method: Method
    dt: float
    q_ref: float | None = None
    degenerate: list = field(default_factory=list)

    def __len__(self):
        return len(self.states)

    def column(self, name: str) -> np.ndarray:
        dtype = float if name in ("Q", "P") else complex
        return np.array([getattr(s, name) for s in self.states], dtype=dtype)

    def records(self) -> np.ndarray:
        return np.array([s.to_record() for s in self.states])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(("t",) + RECORD_COLUMNS)
            for t, s in zip(self.times, self.states):
                wr.writerow([f"{x:.17g}" for x in [t] + s.to_record()])

    def to_json(self, path):
        doc = {
            "method": self.method.value,
            "dt": self.dt,
            "q_ref": self.q_ref,
            "degenerate": list(self.degenerate),
            "columns": ["t", *RECORD_COLUMNS],
            "rows": [[float(t)] + s.to_record() for t, s in zip(self.times, self.states)],
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)


def propagate(g0: GaussianCoherence, sys: TwoStateSystem, dt: float, nsteps: int, method,
              strict: bool = False, moyal_scale: float = 1.0) -> ParameterTrajectory:
    """Fixed-step RK4 propagation, nsteps + 1 samples including g0.

    States that lose normalizability are listed in ``degenerate``; with
    ``strict`` the first one raises DegenerateState instead.
    """
    _check_dt(dt)
    if nsteps < 0:
        raise ValueError("nsteps must be non-negative")
    if not g0.is_normalizable():
        raise DegenerateState("initial state is not normalizable", 0, g0)
    method = Method.parse(method)
    q_ref = g0.Q if method is Method.SEMICLASSICAL_LINEARIZED else None
    coef = _Coefficients(sys, method, q_ref, moyal_scale)
    y = _as_tuple(g0)
    # compensated summation: w grows linearly without bound, and plain
    # accumulation would lose ~1e-9 of phase over 1e5 steps
    comp = (0.0,) * len(y)
    states = [g0]
    degenerate = []
    for n in range(1, nsteps + 1):
        inc = tuple(di - ci for di, ci in zip(_rk4_increment(coef, y, dt), comp))
        new = tuple(yi + di for yi, di in zip(y, inc))
        comp = tuple((ni - yi) - di for ni, yi, di in zip(new, y, inc))
        y = new
        g = _as_state(y)
        if not (g.is_finite() and g.is_normalizable()):
            if strict:
                raise DegenerateState(f"state lost normalizability at step {n}", n, g)
            degenerate.append(n)
        states.append(g)
    times = dt * np.arange(nsteps + 1)
    return ParameterTrajectory(times, states, method, dt, q_ref, degenerate)


def analytic_exact_params(sys: TwoStateSystem, q0, p0, t):
    """(Q, P, u, v) of the exact dynamics from the two surface trajectories
    (valid for initial u = v = 0)."""
    q1, p1 = classical_trajectory(sys.surface1, q0, p0, t)
    q2, p2 = classical_trajectory(sys.surface2, q0, p0, t)
    hbar = sys.hbar
    return 0.5 * (q1 + q2), 0.5 * (p1 + p2), 1j * (p1 - p2) / hbar, -1j * (q1 - q2) / hbar


def average_surface(sys: TwoStateSystem) -> HarmonicSurface:
    return HarmonicSurface(sys.mass, sys.avg_freq, sys.avg_q_eq, 0.0)


def analytic_semiclassical_center(sys: TwoStateSystem, q0, p0, t):
    """Center (Q, P) in the semiclassical limit: motion on the average potential."""
    return classical_trajectory(average_surface(sys), q0, p0, t)


class _ExpSeries:
    """Finite sum of c_n exp(i nu_n t) closed under products and integration."""

    def __init__(self, terms=None):
        self.terms = dict(terms or {})

    @staticmethod
    def _key(nu):
        return round(nu, 15)

    @classmethod
    def harmonic(cls, center, amp_cos, amp_sin, freq):
        # center + amp_cos cos(freq t) + amp_sin sin(freq t)
        return cls({0.0: complex(center),
                    cls._key(freq): 0.5 * (amp_cos - 1j * amp_sin),
                    cls._key(-freq): 0.5 * (amp_cos + 1j * amp_sin)})

    def __add__(self, other):
        out = dict(self.terms)
        for nu, c in other.terms.items():
            out[nu] = out.get(nu, 0j) + c
        return _ExpSeries(out)

    def scale(self, s):
        return _ExpSeries({nu: s * c for nu, c in self.terms.items()})

    def __mul__(self, other):
        out = {}
        for n1, c1 in self.terms.items():
            for n2, c2 in other.terms.items():
                nu = self._key(n1 + n2)
                out[nu] = out.get(nu, 0j) + c1 * c2
        return _ExpSeries(out)

    def integral(self, t):
        """Integral from 0 to t (array)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for nu, c in self.terms.items():
            if nu == 0.0:
                out += c * t
            else:
                out += c * np.expm1(1j * nu * t) / (1j * nu)
        return out


def _surface_series(s: HarmonicSurface, q0, p0) -> _ExpSeries:
    return _ExpSeries.harmonic(s.q_eq, q0 - s.q_eq, p0 / (s.mass * s.freq), s.freq)


def analytic_exact_coherence(sys: TwoStateSystem, times, q0: float | None = None, p0: float = 0.0,
                             width_freq: float | None = None) -> list:
    """Closed-form exact coherence for an initial pure-state Gaussian Wigner
    function centered at (q0, p0) with the coherent-state width of
    frequency ``width_freq`` (defaults: the ground state of surface 1).

    (Q, P, u, v) are the mean and difference of the two surface trajectories.
    The quadratic parameters come from the complex widths alpha_j(t) of the
    two surfaces, and w from integrating its rate in closed form: the
    Moyal b-term integrates to (1/2) log(W(t)/W(0)) with the Wronskian-like
    W = y1' conj(y2) - y1 conj(y2)', alpha_j = (m/2) y_j'/y_j.
    """
    s1, s2 = sys.surface1, sys.surface2
    hbar, m = sys.hbar, sys.mass
    q0 = s1.q_eq if q0 is None else q0
    width_freq = s1.freq if width_freq is None else width_freq
    t = np.atleast_1d(np.asarray(times, dtype=float))
    alpha0 = 0.5j * m * width_freq

    def width_factor(s):
        beta = 2.0 * alpha0 / (m * s.freq)
        ph = s.freq * t
        y = np.cos(ph) + beta * np.sin(ph)
        yd = s.freq * (-np.sin(ph) + beta * np.cos(ph))
        return y, yd

    y1, y1d = width_factor(s1)
    y2, y2d = width_factor(s2)
    al1 = 0.5 * m * y1d / y1
    al2c = np.conj(0.5 * m * y2d / y2)
    diff = al1 - al2c
    a = 4j * al1 * al2c / (hbar * diff)
    b = 1j / (hbar * diff)
    c = 2j * (al1 + al2c) / (hbar * diff)
    Q, P, u, v = analytic_exact_params(sys, q0, p0, t)

    ser1 = _surface_series(s1, q0, p0)
    ser2 = _surface_series(s2, q0, p0)
    qmid = (ser1 + ser2).scale(0.5)
    w0, w1, w2 = difference_frequency(sys, 0.0)
    omega_of_q = _ExpSeries({0.0: complex(w0)}) + qmid.scale(w1) + (qmid * qmid).scale(0.5 * w2)
    w = -math.log(math.pi * hbar) - 1j * omega_of_q.integral(t)
    if sys.omega_pp != 0.0:
        k = 0.125j * hbar**2 * sys.omega_pp
        dq = ser1 + ser2.scale(-1.0)
        # -k * integral of v^2 with v = -i (Q1 - Q2)/hbar
        w += k / hbar**2 * (dq * dq).integral(t)
        wr = y1d * np.conj(y2) - y1 * np.conj(y2d)
        w -= 0.5 * (np.log(np.abs(wr)) + 1j * _continuous_phase(sys, alpha0, t, wr))
        # W(0) = y1'(0) - conj(y2'(0)) = 2 alpha0/m - conj(2 alpha0/m)
        w0r = 2.0 * alpha0 / m - np.conj(2.0 * alpha0 / m)
        w += 0.5 * cmath.log(w0r)
    return [GaussianCoherence(a[i], b[i], c[i], Q[i], P[i], u[i], v[i], w[i]) for i in range(len(t))]


def _continuous_phase(sys, alpha0, t, wr):
    """arg W(t) continued from t = 0 along a dense auxiliary grid."""
    m = sys.mass
    tmax = float(np.max(np.abs(t))) if len(t) else 0.0
    fast = max(sys.surface1.freq, sys.surface2.freq)
    n = max(2, int(math.ceil(tmax * fast / (2 * math.pi) * 256)) + 1)
    tg = np.linspace(0.0, tmax, n) if tmax > 0 else np.zeros(1)

    def wgrid(s_):
        phases = []
        for s in (sys.surface1, sys.surface2):
            beta = 2.0 * alpha0 / (m * s.freq)
            ph = s.freq * s_
            phases.append((np.cos(ph) + beta * np.sin(ph),
                           s.freq * (-np.sin(ph) + beta * np.cos(ph))))
        (y1, y1d), (y2, y2d) = phases
        return y1d * np.conj(y2) - y1 * np.conj(y2d)

    out = np.empty(len(t))
    for sgn, mask in ((1.0, t >= 0), (-1.0, t < 0)):
        if not np.any(mask):
            continue
        grid_phase = np.unwrap(np.angle(wgrid(sgn * tg)))
        ref = np.interp(np.abs(t[mask]), tg, grid_phase)
        raw = np.angle(wr[mask])
        out[mask] = raw + 2 * np.pi * np.round((ref - raw) / (2 * np.pi))
    return out
