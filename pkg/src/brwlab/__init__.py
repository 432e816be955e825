"""Simulation and verification lab for nearest-neighbour branching random walks."""

from .field import ParticleField
from .lattice import Axis, BoxGeometry, Half, KernelKind
from .offspring import OffspringLaw, bernoulli_sum_law
from .simulator import HittingTimes, StepKernel

__version__ = "0.1.0"

__all__ = [
    "Axis",
    "BoxGeometry",
    "Half",
    "HittingTimes",
    "KernelKind",
    "OffspringLaw",
    "ParticleField",
    "StepKernel",
    "bernoulli_sum_law",
]
