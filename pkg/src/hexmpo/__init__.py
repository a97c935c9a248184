"""Tensor-network simulators for kicked-Ising circuits on heavy-hexagon lattices."""

__version__ = "0.1.0"
