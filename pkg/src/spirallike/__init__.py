"""Numerical verification toolkit for spirallike domains in C^n.

Modules
-------
cxlinalg   eigenvalues, matrix exponential, spectral functionals
fields     holomorphic vector fields and their flows
domains    domain predicates, spirallike verification, entry times
refuter    exit certificates for linear flows on the Hartogs domain
linearize  limit map, isotopy and its derivative
autos      shear / overshear words
loewner    Herglotz fields, evolution families, Loewner chains
cli        command line interface
"""

from .errors import SpiralError

__version__ = "0.1.0"

__all__ = ["SpiralError", "__version__"]
