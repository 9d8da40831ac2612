"""Weak kinetic shock profiles for the Landau equation.

Subpackages: basis (Hermite velocity basis), collision (Landau operators),
hydro (Euler/Navier-Stokes data and transport coefficients), ns_shock
(viscous shock profiles and the linearized macroscopic solver), kawashima
(hypocoercivity compensators), kinetic (the constrained steady solver and
the fixed-point correction), cli (command-line front end).
"""

__version__ = "0.1.0"
