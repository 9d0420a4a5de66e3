"""
freejacobi: spectral laws of liberated pairs of symmetries and projections.

The law ν_t of R U_t S U_t* on the unit circle is computed along the
characteristics of its Herglotz transform, and carried to the free Jacobi
law μ_t of P U_t Q U_t* P on [0, 1].
"""

__version__ = "0.1.0"
