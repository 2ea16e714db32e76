"""Hardy function evaluation and the persistent critical-line sample cache."""

from .evaluate import (
    RS_CROSSOVER,
    riemann_siegel_z,
    z_deriv_remainder,
    z_em,
    z_hardy,
    z_hardy_deriv,
    z_method,
    zeta_em,
)
from .cache import CriticalSample, LineSamples, Method, SampleCache, quantize, sample_line
