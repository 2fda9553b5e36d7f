"""Complex phase-space Gaussian for the coherence Wigner function.

    rho(q, p) = exp[-a x^2 - b y^2 + c x y + u x + v y + w],
    x = q - Q,  y = p - P,

with complex a, b, c, u, v, w and a real center (Q, P).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .model import TwoStateSystem

# exponents with real part below this are returned as exactly zero
EXP_FLOOR = -700.0

COMPLEX_FIELDS = ("a", "b", "c", "u", "v", "w")
RECORD_COLUMNS = tuple(
    f"{part} {name}" for name in COMPLEX_FIELDS for part in ("Re", "Im")
) + ("Q", "P")


class NonNormalizable(ValueError):
    """The Gaussian has no convergent phase-space integral."""


@dataclass(frozen=True)
class GaussianCoherence:
    a: complex
    b: complex
    c: complex
    Q: float
    P: float
    u: complex = 0j
    v: complex = 0j
    w: complex = 0j

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if f.name in ("Q", "P"):
                val = float(val)
                if not math.isfinite(val):
                    raise ValueError(f"{f.name} must be finite")
            else:
                val = complex(val)
            object.__setattr__(self, f.name, val)

    def is_normalizable(self) -> bool:
        ar, br, cr = self.a.real, self.b.real, self.c.real
        return ar > 0 and br > 0 and 4.0 * ar * br - cr * cr > 0

    def is_finite(self) -> bool:
        return all(cmath.isfinite(getattr(self, n)) for n in COMPLEX_FIELDS)

    def shift_w(self, s: complex) -> "GaussianCoherence":
        return replace(self, w=self.w + s)

    def to_record(self) -> list[float]:
        """Flat list of 14 reals in ``RECORD_COLUMNS`` order."""
        out = []
        for name in COMPLEX_FIELDS:
            z = getattr(self, name)
            out.extend((z.real, z.imag))
        out.extend((self.Q, self.P))
        return out

    @classmethod
    def from_record(cls, rec) -> "GaussianCoherence":
        rec = [float(x) for x in rec]
        if len(rec) != len(RECORD_COLUMNS):
            raise ValueError(f"expected {len(RECORD_COLUMNS)} values, got {len(rec)}")
        vals = {name: complex(rec[2 * i], rec[2 * i + 1]) for i, name in enumerate(COMPLEX_FIELDS)}
        return cls(Q=rec[-2], P=rec[-1], **vals)

    def to_dict(self) -> dict:
        return dict(zip(RECORD_COLUMNS, self.to_record()))


def exponent(g: GaussianCoherence, q, p):
    x = np.asarray(q) - g.Q
    y = np.asarray(p) - g.P
    return -g.a * x * x - g.b * y * y + g.c * x * y + g.u * x + g.v * y + g.w


def evaluate(g: GaussianCoherence, q, p):
    """Value of the Gaussian at (q, p); broadcasts over arrays."""
    z = np.asarray(exponent(g, q, p), dtype=complex)
    under = z.real < EXP_FLOOR
    out = np.exp(np.where(under, 0.0, z))
    out = np.where(under, 0.0, out)
    if out.ndim == 0:
        return complex(out)
    return out


def ground_state_coherence(sys: TwoStateSystem) -> GaussianCoherence:
    """Wigner function of the vibrational ground state of surface 1."""
    s, hbar = sys.surface1, sys.hbar
    mw = s.mass * s.freq
    return GaussianCoherence(
        a=mw / hbar,
        b=1.0 / (mw * hbar),
        c=0.0,
        Q=s.q_eq,
        P=0.0,
        u=0.0,
        v=0.0,
        w=-math.log(math.pi * hbar),
    )


def sqrt_det(g: GaussianCoherence) -> complex:
    """sqrt(4ab - c^2) on the branch continuous over the normalizable set.

    The quadratic form matrix M = [[a, -c/2], [-c/2, b]] has a positive
    definite real part there, so both eigenvalues lie in the right half
    plane and the product of their principal roots is the continuation
    of the positive root from real positive-definite M.
    """
    a, b, c = g.a, g.b, g.c
    half_tr = 0.5 * (a + b)
    det = a * b - 0.25 * c * c
    disc = cmath.sqrt(half_tr * half_tr - det)
    lam1 = half_tr + disc if abs(half_tr + disc) >= abs(half_tr - disc) else half_tr - disc
    lam2 = det / lam1 if lam1 != 0 else 0j
    return 2.0 * cmath.sqrt(lam1) * cmath.sqrt(lam2)


def log_trace(g: GaussianCoherence) -> complex:
    """Logarithm of the phase-space integral (branch of the log of the
    prefactor is the principal one of the continuous square root)."""
    if not g.is_normalizable():
        raise NonNormalizable(f"quadratic form not positive definite: a={g.a}, b={g.b}, c={g.c}")
    s = sqrt_det(g)
    d = s * s
    expo = g.w + (g.b * g.u**2 + g.a * g.v**2 + g.c * g.u * g.v) / d
    return math.log(2.0 * math.pi) - cmath.log(s) + expo


def trace(g: GaussianCoherence) -> complex:
    """Closed-form integral of the Gaussian over the whole phase plane."""
    z = log_trace(g)
    if z.real < EXP_FLOOR:
        return 0j
    return cmath.exp(z)
