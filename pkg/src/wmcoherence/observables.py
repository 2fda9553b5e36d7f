"""Correlation function, absorption spectrum and peak statistics.

Sign convention: with omega(q) = (U1 - U2)/hbar the trace rotates as
exp(+i dE t/hbar) for an upper state dE above the lower one, so the
spectrum is

    sigma(w) = Re int_0^T c(t) exp(-i w t) exp(-t/tau) window(t) dt,

which puts the absorption band at positive frequency.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import gaussian, oracle
from .model import TwoStateSystem


class ChannelMismatch(ValueError):
    pass


class TooFewPeaks(ValueError):
    pass


@dataclass
class CorrelationSeries:
    times: np.ndarray
    values: np.ndarray
    method: str
    channel: str

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.times.shape != self.values.shape:
            raise ChannelMismatch("times and values differ in length")
        if len(self.times) > 1:
            steps = np.diff(self.times)
            if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * abs(steps[0]) + 1e-12:
                raise ChannelMismatch("correlation series must be uniformly sampled")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(("t", "Re c", "Im c", "|c|"))
            for t, c in zip(self.times, self.values):
                wr.writerow([f"{x:.17g}" for x in (t, c.real, c.imag, abs(c))])

    @classmethod
    def from_csv(cls, path, method="unknown", channel="file") -> "CorrelationSeries":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1] + 1j * data[:, 2], method, channel)


def correlation_series(source, method: str | None = None, channel: str | None = None) -> CorrelationSeries:
    """c(t) = Tr rho12(t) from a parameter trajectory, a grid run
    (sequence of PhaseSpaceGrid snapshots) or an explicit (times, values)
    pair from the oracle."""
    from .dynamics import ParameterTrajectory
    from .grid import PhaseSpaceGrid, grid_trace

    if isinstance(source, ParameterTrajectory):
        vals = [gaussian.trace(s) if s.is_normalizable() else np.nan for s in source.states]
        return CorrelationSeries(source.times, vals, method or source.method.value, channel or "gaussian")
    if isinstance(source, (list, tuple)) and source and isinstance(source[0], PhaseSpaceGrid):
        times = [s.t for s in source]
        vals = [grid_trace(s) for s in source]
        return CorrelationSeries(times, vals, method or source[0].method, channel or "grid")
    times, vals = source
    return CorrelationSeries(times, vals, method or "moyal", channel or "oracle")


def oracle_series(sys: TwoStateSystem, dt: float, nsteps: int) -> CorrelationSeries:
    times = dt * np.arange(nsteps + 1)
    return CorrelationSeries(times, oracle.correlation(sys, times), "moyal", "oracle")


def truncate_to_periods(series: CorrelationSeries, period: float) -> CorrelationSeries:
    """Keep the samples in [0, n*period) for the largest whole n."""
    n_per = math.floor((series.times[-1] - series.times[0]) / period + 1e-9)
    if n_per < 1:
        raise ValueError("series shorter than one period")
    keep = int(round(n_per * period / series.dt))
    return CorrelationSeries(series.times[:keep], series.values[:keep], series.method, series.channel)


@dataclass
class Spectrum:
    omega: np.ndarray
    intensity: np.ndarray
    window: str
    tau: float
    zero_pad: int
    imag_residue: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def bin_width(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(("omega", "intensity"))
            for w, s in zip(self.omega, self.intensity):
                wr.writerow([f"{w:.17g}", f"{s:.17g}"])


def _window(name: str, n: int) -> np.ndarray:
    if name in ("rect", "rectangular", None):
        return np.ones(n)
    if name == "hann":
        # periodic Hann over [0, T): no taper at t = 0 beyond its own value
        return 0.5 * (1.0 + np.cos(np.pi * np.arange(n) / n))
    raise ValueError(f"unknown window {name!r}")


def spectrum(series: CorrelationSeries, window: str = "hann", tau: float = math.inf,
             zero_pad: int = 8, one_sided: bool = True) -> Spectrum:
    """Absorption spectrum by discrete Fourier transform of c(t).

    The samples are treated as covering [0, N dt). The half-range transform
    is evaluated as the transform of the Hermitian extension c(-t) = c(t)*,
    which is real by construction; the discarded imaginary part is kept in
    ``imag_residue`` as a check. The Hann taper is the half-cosine falling
    from 1 at t = 0 to 0 at t = T, i.e. a symmetric Hann window on [-T, T].
    """
    if zero_pad < 2:
        raise ValueError("zero_pad must be at least 2 to hold the Hermitian extension")
    c = series.values
    n = len(c)
    dt = series.dt
    t = series.times - series.times[0]
    x = c * _window(window, n)
    if math.isfinite(tau):
        x = x * np.exp(-t / tau)
    size = zero_pad * n
    ext = np.zeros(size, dtype=complex)
    ext[0] = x[0].real
    ext[1:n] = 0.5 * x[1:]
    ext[size - n + 1:] = 0.5 * np.conj(x[1:])[::-1]
    spec = np.fft.fft(ext) * dt
    omega = 2.0 * np.pi * np.fft.fftfreq(size, d=dt)
    order = np.argsort(omega)
    omega, spec = omega[order], spec[order]
    if one_sided:
        keep = omega >= 0
        omega, spec = omega[keep], spec[keep]
    resid = float(np.max(np.abs(spec.imag)))
    return Spectrum(omega, spec.real.copy(), window or "rect", tau, zero_pad, resid)


def parseval_power(series: CorrelationSeries, zero_pad: int = 1):
    """Both sides of the discrete Parseval identity

        sum |c_k|^2 dt = (1/2pi) sum_j |C_j|^2 domega,

    C_j = dt * DFT(c)_j on the (zero-padded) grid domega = 2pi/(N_pad dt).
    """
    c = series.values
    dt = series.dt
    size = zero_pad * len(c)
    C = np.fft.fft(c, n=size) * dt
    dw = 2.0 * np.pi / (size * dt)
    return float(np.sum(np.abs(c) ** 2) * dt), float(np.sum(np.abs(C) ** 2) * dw / (2.0 * np.pi))


def find_peaks(sp: Spectrum, floor: float = 0.05) -> list:
    """Local maxima above floor * max intensity, refined by a parabola
    through the three samples around each maximum. Sorted by frequency."""
    if not 0.0 < floor < 1.0:
        raise ValueError("floor must lie in (0, 1)")
    y = sp.intensity
    if len(y) < 3:
        return []
    top = float(np.max(y))
    if not top > 0.0:
        return []
    mid = y[1:-1]
    idx = np.nonzero((mid > y[:-2]) & (mid >= y[2:]) & (mid > floor * top))[0] + 1
    dw = sp.bin_width
    peaks = []
    for i in idx:
        ym, y0, yp = y[i - 1], y[i], y[i + 1]
        denom = ym - 2.0 * y0 + yp
        shift = 0.5 * (ym - yp) / denom if denom != 0 else 0.0
        peaks.append((float(sp.omega[i] + shift * dw), float(y0 - 0.25 * (ym - yp) * shift)))
    return sorted(peaks)


def peak_spacing(peaks) -> tuple:
    """Mean of consecutive spacings and their largest deviation from it."""
    if len(peaks) < 3:
        raise TooFewPeaks(f"need at least 3 peaks, got {len(peaks)}")
    centers = np.array([p[0] for p in peaks])
    gaps = np.diff(centers)
    mean = float(np.mean(gaps))
    return mean, float(np.max(np.abs(gaps - mean)))
