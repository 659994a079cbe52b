"""Exception hierarchy for etadrc."""


class EtadrcError(Exception):
    pass


class DimensionError(EtadrcError, ValueError):
    """Vector or matrix has the wrong shape."""


class DomainError(EtadrcError, ValueError):
    """Scalar argument outside its admissible range."""


class NoSolutionError(EtadrcError):
    """Lyapunov equation has no positive definite solution (matrix not Hurwitz)."""


class NumericalFailure(EtadrcError):
    pass


class PreconditionError(EtadrcError, ValueError):
    pass


class AssumptionViolation(EtadrcError):
    """A sampled check of a declared modelling assumption failed."""

    def __init__(self, assumption, message):
        super().__init__(f"assumption {assumption} violated: {message}")
        self.assumption = assumption


class ContractViolation(EtadrcError):
    pass


class DivergenceError(EtadrcError):
    """State blew up during integration."""

    def __init__(self, t, stream_id=None):
        where = "" if stream_id is None else f" (stream_id={stream_id})"
        super().__init__(f"trajectory diverged at t={t!r}{where}")
        self.t = t
        self.stream_id = stream_id


class ConfigError(EtadrcError, ValueError):
    pass
