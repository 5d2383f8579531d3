"""lrgl: boundary-driven Ginzburg-Landau lattice dynamics with long-range interactions.

Layers, bottom to top:
  model     -- potentials U, mobilities beta, couplings K (exact symmetry structure)
  thermo    -- single-site Gibbs thermodynamics and the coarse coefficients A, B
  sde       -- microscopic O(n^2) pair-exchange dynamics, baths, Girsanov tilting, BEM
  hydro     -- weak-form fractional operators, evolution / stationary solvers, Green-Kubo
  mft       -- rate functionals, Hamiltonians, quasi-potentials, Hamilton-Jacobi residuals
  cli       -- configuration-driven experiment runner (`lrgl run|validate`)
"""

__version__ = "0.1.0"

from . import model, thermo, sde, hydro, mft  # noqa: F401
