"""Exact quantum reference built from thawed Gaussian wavepackets.

    psi(q) = exp[(i/hbar) (alpha (q - qc)^2 + pc (q - qc) + gamma)]

Each ket evolves on its own harmonic surface in closed form, and the
coherence is the cross-Wigner transform of the pair.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .gaussian import GaussianCoherence
from .model import HarmonicSurface, TwoStateSystem, classical_trajectory


@dataclass(frozen=True)
class ThawedGaussian:
    alpha: complex
    qc: float
    pc: float
    gamma: complex
    hbar: float = 1.0

    def __post_init__(self):
        if not complex(self.alpha).imag > 0:
            raise ValueError("Im(alpha) must be positive")

    def __call__(self, q):
        x = np.asarray(q) - self.qc
        return np.exp(1j / self.hbar * (self.alpha * x * x + self.pc * x + self.gamma))


def normalized_gamma(alpha: complex, hbar: float = 1.0) -> complex:
    """Purely imaginary gamma giving unit norm for width alpha."""
    return 0.25j * hbar * math.log(math.pi * hbar / (2.0 * alpha.imag))


def ground_wavepacket(s: HarmonicSurface, hbar: float = 1.0) -> ThawedGaussian:
    alpha = 0.5j * s.mass * s.freq
    return ThawedGaussian(alpha, s.q_eq, 0.0, normalized_gamma(alpha, hbar), hbar)


def _log_width_factor(beta: complex, phase: float) -> complex:
    # continuous log of cos(phase) + beta*sin(phase); Im(beta) > 0 keeps each
    # half-period in the upper half plane, consecutive ones differ by a sign
    k = math.floor(phase / math.pi)
    r = phase - k * math.pi
    y = math.cos(r) + beta * math.sin(r)
    return math.log(abs(y)) + 1j * (math.atan2(y.imag, y.real) + k * math.pi)


def _classical_action(s: HarmonicSurface, q0: float, p0: float, t: float) -> float:
    mw = s.mass * s.freq
    x0 = q0 - s.q_eq
    b0 = p0 / mw
    two = 2.0 * s.freq * t
    return (0.25 * mw * (b0 * b0 - x0 * x0) * math.sin(two)
            + 0.5 * mw * x0 * b0 * (math.cos(two) - 1.0)
            - s.energy * t)


def propagate_thawed(s: HarmonicSurface, psi0: ThawedGaussian, t: float) -> ThawedGaussian:
    """Exact evolution of a Gaussian packet on a harmonic surface."""
    t = float(t)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    if t == 0.0:
        return psi0
    hbar = psi0.hbar
    m, om = s.mass, s.freq
    beta = 2.0 * psi0.alpha / (m * om)
    phase = om * t
    cos, sin = math.cos(phase), math.sin(phase)
    alpha = (psi0.alpha * cos - 0.5 * m * om * sin) / (cos + beta * sin)
    qc, pc = classical_trajectory(s, psi0.qc, psi0.pc, t)
    gamma = (psi0.gamma
             + 0.5j * hbar * _log_width_factor(beta, phase)
             + _classical_action(s, psi0.qc, psi0.pc, t))
    return ThawedGaussian(alpha, qc, pc, gamma, hbar)


def overlap(psi_a: ThawedGaussian, psi_b: ThawedGaussian) -> complex:
    """<psi_a|psi_b> = integral of conj(psi_a) * psi_b."""
    ih = 1j / psi_a.hbar
    aa, ab = psi_a.alpha.conjugate(), psi_b.alpha
    A = -ih * (ab - aa)
    B = ih * (-2.0 * ab * psi_b.qc + 2.0 * aa * psi_a.qc + psi_b.pc - psi_a.pc)
    C = ih * (ab * psi_b.qc**2 - aa * psi_a.qc**2
              - psi_b.pc * psi_b.qc + psi_a.pc * psi_a.qc
              + psi_b.gamma - psi_a.gamma.conjugate())
    return cmath.sqrt(math.pi / A) * cmath.exp(B * B / (4.0 * A) + C)


def cross_wigner(psi1: ThawedGaussian, psi2: ThawedGaussian) -> GaussianCoherence:
    """Wigner transform of |psi1><psi2|, centered at the midpoint of the packets.

    The y-integral of psi1(q + y/2) conj(psi2(q - y/2)) exp(-i p y/hbar)
    is Gaussian; its log is a quadratic polynomial in (q - Q, p - P)
    whose coefficients give the ansatz parameters.
    """
    hbar = psi1.hbar
    ih = 1j / hbar
    a1, a2 = psi1.alpha, psi2.alpha.conjugate()
    Q = 0.5 * (psi1.qc + psi2.qc)
    P = 0.5 * (psi1.pc + psi2.pc)
    d1, d2 = Q - psi1.qc, Q - psi2.qc
    # y^2 coefficient is -A; linear-in-y coefficient L0 + Lx x + Ls s
    A = -0.25 * ih * (a1 - a2)
    Lx = ih * (a1 + a2)
    Ls = -ih
    L0 = ih * (a1 * d1 + a2 * d2 + 0.5 * (psi1.pc + psi2.pc) - P)
    # y-independent part R0 + Rx x + Rxx x^2
    Rxx = ih * (a1 - a2)
    Rx = ih * (2.0 * a1 * d1 - 2.0 * a2 * d2 + psi1.pc - psi2.pc)
    R0 = ih * (a1 * d1 * d1 - a2 * d2 * d2 + psi1.pc * d1 - psi2.pc * d2
               + psi1.gamma - psi2.gamma.conjugate())
    inv4A = 1.0 / (4.0 * A)
    return GaussianCoherence(
        a=-(Lx * Lx * inv4A + Rxx),
        b=-Ls * Ls * inv4A,
        c=2.0 * Lx * Ls * inv4A,
        Q=Q,
        P=P,
        u=2.0 * L0 * Lx * inv4A + Rx,
        v=2.0 * L0 * Ls * inv4A,
        w=L0 * L0 * inv4A + R0 + cmath.log(cmath.sqrt(math.pi / A) / (2.0 * math.pi * hbar)),
    )


def packet_pair(sys: TwoStateSystem, t: float, psi0: ThawedGaussian | None = None):
    """Kets on surfaces 1 and 2 at time t, both starting from psi0
    (default: ground state of surface 1)."""
    if psi0 is None:
        psi0 = ground_wavepacket(sys.surface1, sys.hbar)
    return propagate_thawed(sys.surface1, psi0, t), propagate_thawed(sys.surface2, psi0, t)


def coherence_at(sys: TwoStateSystem, t: float, psi0: ThawedGaussian | None = None) -> GaussianCoherence:
    return cross_wigner(*packet_pair(sys, t, psi0))


def correlation(sys: TwoStateSystem, times, psi0: ThawedGaussian | None = None) -> np.ndarray:
    """Tr rho12(t) = <psi2(t)|psi1(t)> on the given times."""
    out = np.empty(len(times), dtype=complex)
    for k, t in enumerate(times):
        psi1, psi2 = packet_pair(sys, t, psi0)
        out[k] = overlap(psi2, psi1)
    return out
