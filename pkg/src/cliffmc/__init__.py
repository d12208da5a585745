"""Logical error rates for the idling surface code under mixed coherent and
stochastic circuit-level noise, estimated by Monte Carlo sampling over
Clifford decompositions of noisy circuits with phase-exact stabilizer
simulation."""

from .chform import BACKEND, CHState

__version__ = "0.1.0"
__all__ = ["BACKEND", "CHState", "__version__"]
