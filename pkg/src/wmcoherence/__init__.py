"""Wigner-Moyal dynamics of the electronic coherence of a two-state
displaced-harmonic molecule: exact Moyal evolution versus its
semiclassical limit, with correlation functions and absorption spectra."""

from .model import HarmonicSurface, PhasePoint, TwoStateSystem, published_system
from .gaussian import GaussianCoherence, NonNormalizable
from .dynamics import Method, ParameterTrajectory

__version__ = "0.1.0"

__all__ = [
    "HarmonicSurface",
    "PhasePoint",
    "TwoStateSystem",
    "published_system",
    "GaussianCoherence",
    "NonNormalizable",
    "Method",
    "ParameterTrajectory",
    "__version__",
]
