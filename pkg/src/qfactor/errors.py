"""Exception hierarchy shared by all qfactor modules."""


class QFactorError(Exception):
    """Base class for every error raised by qfactor."""


class LayoutError(QFactorError):
    """Labels or shapes of two objects do not fit together."""


class DimensionError(QFactorError):
    pass


class HermiticityError(QFactorError):
    pass


class NotCPError(QFactorError):
    """A Choi operator has an eigenvalue clearly below zero."""


class PreconditionError(QFactorError):
    pass


class StateError(QFactorError):
    """Input is not a density operator (PSD with unit trace)."""


class NotAnAlgebraError(QFactorError):
    pass


class NotMarkovError(QFactorError):
    """Conditional mutual information above the Markov threshold."""

    def __init__(self, cmi, threshold):
        super().__init__(f"conditional mutual information {cmi:.3e} exceeds {threshold:.1e}")
        self.cmi = cmi
        self.threshold = threshold


class StructureError(QFactorError):
    """A block of a Markov decomposition fails the product check."""

    def __init__(self, message, block=None, residual=None):
        super().__init__(message)
        self.block = block
        self.residual = residual


class ConditionError(QFactorError):
    """Preconditions of a factorisation are violated.

    ``report`` carries the :class:`~qfactor.factorise.ConditionReport` for the
    two-map case; ``stage`` names the violating map index for the multi-map case.
    """

    def __init__(self, message, report=None, stage=None, failed=()):
        super().__init__(message)
        self.report = report
        self.stage = stage
        self.failed = tuple(failed)


class FactorisationImpossible(QFactorError):
    def __init__(self, cmi, stage=None):
        where = "" if stage is None else f" at stage {stage}"
        super().__init__(f"Choi state is not Markov{where}: CMI = {cmi:.6g} bits")
        self.cmi = cmi
        self.stage = stage


class CertificateError(QFactorError):
    def __init__(self, residual, bound):
        super().__init__(f"certificate residual {residual:.3e} exceeds {bound:.1e}")
        self.residual = residual
        self.bound = bound
