"""Two displaced harmonic surfaces sharing one nuclear mass.

All quantities are in atomic units. hbar is carried explicitly so that the
classical limit can be inspected by scaling it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class PhasePoint(NamedTuple):
    q: float
    p: float


@dataclass(frozen=True)
class HarmonicSurface:
    """U(q) = m*freq**2*(q - q_eq)**2/2 + energy."""

    mass: float
    freq: float
    q_eq: float = 0.0
    energy: float = 0.0

    def __post_init__(self):
        for name in ("mass", "freq", "q_eq", "energy"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.freq <= 0:
            raise ValueError("freq must be positive")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.freq

    def energy_at(self, q, p):
        return p**2 / (2.0 * self.mass) + surface_potential(self, q)


@dataclass(frozen=True)
class TwoStateSystem:
    surface1: HarmonicSurface
    surface2: HarmonicSurface
    hbar: float = 1.0

    def __post_init__(self):
        if self.surface1.mass != self.surface2.mass:
            raise ValueError("both surfaces must share the nuclear mass")
        if not (math.isfinite(self.hbar) and self.hbar > 0):
            raise ValueError("hbar must be positive and finite")

    @property
    def mass(self) -> float:
        return self.surface1.mass

    @property
    def avg_freq(self) -> float:
        """Root-mean-square of the two surface frequencies."""
        return math.sqrt(0.5 * (self.surface1.freq**2 + self.surface2.freq**2))

    @property
    def avg_q_eq(self) -> float:
        """Minimum of the average potential."""
        w1, w2 = self.surface1.freq**2, self.surface2.freq**2
        return (w1 * self.surface1.q_eq + w2 * self.surface2.q_eq) / (w1 + w2)

    @property
    def omega_pp(self) -> float:
        """Constant curvature of the difference frequency."""
        return self.mass * (self.surface1.freq**2 - self.surface2.freq**2) / self.hbar

    def to_dict(self) -> dict:
        s1, s2 = self.surface1, self.surface2
        return {
            "m": s1.mass,
            "omega1": s1.freq,
            "omega2": s2.freq,
            "q1e": s1.q_eq,
            "q2e": s2.q_eq,
            "e1": s1.energy,
            "e2": s2.energy,
            "hbar": self.hbar,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TwoStateSystem":
        m = float(d["m"])
        s1 = HarmonicSurface(m, float(d["omega1"]), float(d.get("q1e", 0.0)), float(d.get("e1", 0.0)))
        s2 = HarmonicSurface(m, float(d["omega2"]), float(d.get("q2e", 0.0)), float(d.get("e2", 0.0)))
        return cls(s1, s2, float(d.get("hbar", 1.0)))


def published_system() -> TwoStateSystem:
    """Reference parameter set: ground surface at the origin, upper surface
    softer and displaced by one bohr, 0.1 hartree above."""
    return TwoStateSystem(
        HarmonicSurface(2000.0, 0.01, 0.0, 0.0),
        HarmonicSurface(2000.0, 0.004, 1.0, 0.1),
    )


def surface_potential(s: HarmonicSurface, q):
    return 0.5 * s.mass * s.freq**2 * (q - s.q_eq) ** 2 + s.energy


def _surface_force_constant(s: HarmonicSurface) -> float:
    return s.mass * s.freq**2


def average_potential(sys: TwoStateSystem, q):
    """Average potential and its curvature data.

    Returns
    -------
    (U0, dU0, d2U0, avg_freq, avg_q_eq)
        U0 and its first two derivatives at q, plus the frequency and
        minimum of U0.
    """
    s1, s2 = sys.surface1, sys.surface2
    k1, k2 = _surface_force_constant(s1), _surface_force_constant(s2)
    u0 = 0.5 * (surface_potential(s1, q) + surface_potential(s2, q))
    du0 = 0.5 * (k1 * (q - s1.q_eq) + k2 * (q - s2.q_eq))
    d2u0 = 0.5 * (k1 + k2)
    return u0, du0, d2u0, sys.avg_freq, sys.avg_q_eq


def difference_frequency(sys: TwoStateSystem, q):
    """omega(q) = (U1 - U2)/hbar with first and (constant) second derivative."""
    s1, s2 = sys.surface1, sys.surface2
    k1, k2 = _surface_force_constant(s1), _surface_force_constant(s2)
    w = (surface_potential(s1, q) - surface_potential(s2, q)) / sys.hbar
    dw = (k1 * (q - s1.q_eq) - k2 * (q - s2.q_eq)) / sys.hbar
    return w, dw, sys.omega_pp


def classical_trajectory(s: HarmonicSurface, q0, p0, t) -> PhasePoint:
    """Closed-form harmonic motion on one surface; t may be an array."""
    wt = s.freq * np.asarray(t, dtype=float)
    cos, sin = np.cos(wt), np.sin(wt)
    x0 = q0 - s.q_eq
    mw = s.mass * s.freq
    q = s.q_eq + x0 * cos + p0 / mw * sin
    p = p0 * cos - mw * x0 * sin
    if np.ndim(t) == 0:
        return PhasePoint(float(q), float(p))
    return PhasePoint(q, p)
