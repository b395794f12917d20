"""decolab: a numerical laboratory for spacetime-fluctuation decoherence.

Two noise models for a mechanical oscillator on a truncated Fock space — a
fluctuating commutator deformation (collapse operator K², the kinetic energy
squared) and a metric-fluctuation model (collapse operator K) — with
master-equation integration, stochastic-trajectory unraveling, closed-form
perturbative results, decay-curve fitting, and experimental bound extraction.
"""

from . import analytic, cli, estimate, exceptions, fock, generators, integrate, trajectories
from .generators import PLANCK, KernelSpec, ModelParams, PhysicalConstants

__all__ = [
    "analytic",
    "cli",
    "estimate",
    "exceptions",
    "fock",
    "generators",
    "integrate",
    "trajectories",
    "PLANCK",
    "KernelSpec",
    "ModelParams",
    "PhysicalConstants",
]

__version__ = "0.1.0"
