"""Numerical laboratory for rough singular integrals: sphere densities,
kernels, Calderon-Zygmund decompositions, direction nets and multipliers,
grid quadrature of the operators and weak-type probes."""
from . import _backend

__version__ = "0.1.0"
BACKEND = _backend.NAME
