"""
blowup-lab: a numerical laboratory for quantized type-II blowup of the
corotational harmonic map heat flow in dimensions d >= 7.

The package is organized bottom-up:

- numerics: log-uniform radial grids, quadrature, stencils and fits
- profile: the ground state Q and its background fields
- linop: the linearized operator, its factorization and kernel iterates
- qb: the approximate profile Q_b, its corrections and residual
- modes: the finite-dimensional b-system and its rates
- sim: the dynamically rescaled PDE simulation
- services: the verification suite
"""

__version__ = "0.3.0"

__all__ = ["__version__"]
