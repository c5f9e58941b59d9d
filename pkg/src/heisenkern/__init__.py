"""Heisenberg-group heat kernel numerics.

Subpackages cover the group calculus, Carnot-Caratheodory geometry, the
heat kernel and its complex-shifted variants, heat-semigroup quadrature,
Monte Carlo simulation of the horizontal diffusion, and a verification
harness for gradient and functional inequalities.
"""

__version__ = "0.1.0"
