"""Exception types shared across the package."""


class PkrgError(Exception):
    """Base class for all package errors."""


class SymmetryError(PkrgError, ValueError):
    """Spectral coefficients are not conjugate-symmetric (field would be complex)."""


class DomainError(PkrgError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class BandRangeError(PkrgError, ValueError):
    """A Littlewood-Paley band is not represented on the frequency lattice."""


class ResolutionError(PkrgError, ValueError):
    """A geometric object is too small to be resolved on the grid."""


class PreconditionError(PkrgError, ValueError):
    """A documented precondition of a measurement does not hold."""


class BlowUpError(PkrgError, ArithmeticError):
    """Solver state became non-finite or exceeded the sup-norm ceiling.

    Attributes
    ----------
    time : float
        Simulation time of the last step attempted.
    band : int or None
        Dyadic band holding the largest share of the offending energy.
    """

    def __init__(self, message: str, time: float, band=None):
        super().__init__(f"{message} (t={time:.6g}, band={band})")
        self.time = time
        self.band = band


class BarrierNotFoundError(PkrgError, RuntimeError):
    """No radius in (0, 2^-10) avoids every bad cube.

    Attributes
    ----------
    l1_norm : float
        L1 norm over (0, 2^-10) of the interval-count function, for diagnosis.
    """

    def __init__(self, message: str, l1_norm: float):
        super().__init__(f"{message} (||f||_L1={l1_norm:.3e})")
        self.l1_norm = l1_norm


class ConfigError(PkrgError, ValueError):
    """Invalid configuration; ``problems`` lists (field path, reason) pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        text = "; ".join(f"{path}: {why}" for path, why in self.problems)
        super().__init__(f"invalid configuration: {text}")
