"""Numerical laboratory for the modified Mellin transform of |zeta(1/2+ix)|^(2k).

Subpackages follow the pipeline order: ``numerics`` (special functions),
``zeta`` (Hardy function and sample cache), ``moments`` (fourth moment and
E2), ``mellin`` (transform identities, Z_k and z_2), ``spectral`` (Hecke
sums and saddle diagnostics) and ``cli`` (batch driver).
"""

__version__ = "0.1.0"
