"""Numerical toolkit for parabolic equations with Muckenhoupt-weighted
volumetric heat capacity: weight characteristics, weighted cylinder
geometry, oscillation functionals, maximal-function and covering
machinery, an implicit finite-difference solver, and audit harnesses
for the associated energy and regularity estimates.
"""

__version__ = "0.1.0"
