"""p-adic algebraic-dynamics toolkit.

Interpolates orbits of polynomial self-maps by p-adic analytic functions in
the Mahler basis, decomposes zero sets of linear recurrences into arithmetic
progressions plus sporadic indices, computes return-set certificates for
orbit/subvariety intersections, certifies non-preperiodicity of points, and
formally linearizes map germs at fixed points.
"""

__version__ = "0.1.0"

from .errors import (
    BadPrime,
    BadRecurrence,
    CompositionDomain,
    DecayViolation,
    DivisionByZero,
    DomainError,
    NoPrimeFound,
    NotFixedModP,
    PadicdynError,
    PrecisionExhausted,
    ResonanceObstruction,
    SingularLinearPart,
)
from .padic import PadicNumber, PrecisionPolicy, binom_padic, padic_exp, padic_log
# remaining re-exports appended as modules land
