"""Variational tools for total-collision trajectories of the power-law N-body problem."""

from . import central, mcgehee, morse, nbody, spectral, weakforce  # noqa: F401

__version__ = "0.1.0"
