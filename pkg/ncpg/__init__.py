"""
Non-commutative probability numerics

Finite-dimensional fermionic Fock-space models for twisted L^p spaces,
Grassmann Brownian motion, Itô/Girsanov calculus and the lattice diagnostics
of the Wick-quartic interaction.

This package contains:
- Kernel: dense operator primitives, Jordan-Wigner CAR operators, matchings
- Models: the quasi-free CAR model, Wick products, modular flow, OU semigroup
- Spaces: twisted L^p norms, filtrations, conditional expectations, Hardy norms
- Stochastic: GBM, Itô integrals and formula, Girsanov, SDE solvers
- Lattice: momentum-lattice sums for the Wick quartic
- Suites: invariant suites run by the verify orchestrator
- Utils: logging, errors, validation and fits
"""

__version__ = "1.0.0"
__author__ = "NCPG Numerics Team"
