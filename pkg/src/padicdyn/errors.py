"""Exception vocabulary shared across the toolkit."""


class PadicdynError(Exception):
    """Base class for all toolkit errors."""


class DomainError(PadicdynError):
    """Input outside the convergence/validity domain of an operation."""


class DivisionByZero(PadicdynError):
    """Inversion of an exact zero."""


class PrecisionExhausted(PadicdynError):
    """Working precision is insufficient to decide the requested question."""


class CompositionDomain(PadicdynError):
    """Series substitution with an inner constant term that is a unit."""


class NoPrimeFound(PadicdynError):
    """Prime search exceeded its cap without meeting the screening conditions."""


class BadPrime(PadicdynError):
    """A user-supplied prime fails a screening condition."""


class BadRecurrence(PadicdynError):
    """Recurrence with vanishing trailing coefficient (companion matrix singular)."""


class NotFixedModP(PadicdynError):
    """Rescaling base point is not fixed by the map modulo p."""


class SingularLinearPart(PadicdynError):
    """Linear part of the rescaled map is degenerate mod p (ramification)."""


class DecayViolation(PadicdynError):
    """Measured interpolation coefficients decay slower than the certified rate."""


class ResonanceObstruction(PadicdynError):
    """Term-by-term conjugacy hit a zero denominator with nonzero numerator."""

    def __init__(self, target_index, exponents, degree):
        self.target_index = target_index
        self.exponents = tuple(exponents)
        self.degree = degree
        super().__init__(
            f"resonant obstruction at degree {degree}: component {target_index}, "
            f"monomial exponents {self.exponents}"
        )
