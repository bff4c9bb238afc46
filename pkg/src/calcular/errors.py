"""Exception hierarchy.

Errors fall into three families that the command line maps onto exit codes:
math-domain errors (bad input for the mathematics), solver errors and job
schema errors.
"""


class CalcularError(Exception):
    """Base class for every error raised by this package."""


class MathDomainError(CalcularError, ValueError):
    pass


class SolverError(CalcularError, RuntimeError):
    pass


class NotHermitian(MathDomainError):
    pass


class NotPSD(MathDomainError):
    pass


class NoConvergence(SolverError):
    pass


class OutsideDomain(MathDomainError):
    pass


class SingularResolvent(MathDomainError):
    pass


class UnsupportedVariant(MathDomainError):
    pass


class DimensionMismatch(MathDomainError):
    pass


class NotCommuting(MathDomainError):
    pass


class SingularGram(MathDomainError):
    pass


class DuplicatePoints(MathDomainError):
    pass


class SpectrumOutsideDomain(MathDomainError):
    pass


class WrongDimension(MathDomainError):
    pass


class NotInClass(MathDomainError):
    pass


class CertificateInvalid(MathDomainError):
    pass


class RankDeficiencyUnresolvable(MathDomainError):
    pass


class UnsupportedDimension(MathDomainError):
    pass


class NoFeasibleSample(MathDomainError):
    def __init__(self, message, rejection_rate=1.0):
        super().__init__(message)
        self.rejection_rate = rejection_rate


class Infeasible(SolverError):
    """The solver found a certificate of infeasibility.

    ``certificate`` carries the dual direction (a dict of plain lists) so it
    can be echoed into reports.
    """

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class SolverDiverged(SolverError):
    pass


class SchemaError(CalcularError, ValueError):
    """Job document failed validation; ``path`` is a JSON pointer."""

    def __init__(self, message, path=""):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path
