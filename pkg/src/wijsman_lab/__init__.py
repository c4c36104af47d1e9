"""Finite-scale diagnostics for modulus-modulated Wijsman set convergence."""

__version__ = "0.1.0"
