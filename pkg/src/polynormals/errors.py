"""Exception hierarchy shared by the library and the command-line front end."""


class PolynormalsError(Exception):
    """Base class; ``exit_code`` is what the CLI returns when it escapes."""

    exit_code = 2


class DegenerateInput(PolynormalsError):
    pass


class NotSimple(PolynormalsError):
    pass


class NotInAffineHull(PolynormalsError):
    pass


class PointNotInterior(PolynormalsError):
    pass


class PointNotInCone(PolynormalsError):
    pass


class MarginalRecordsPresent(PolynormalsError):
    pass


class NonGenericSample(PolynormalsError):
    pass


class DegenerateTriangle(PolynormalsError):
    pass


class NonConvergence(PolynormalsError):
    pass


class PreconditionFailed(PolynormalsError):
    pass


class BadIncidence(PolynormalsError):
    pass


class GenerationFailed(PolynormalsError):
    pass


class UnknownName(PolynormalsError):
    pass


class ConsistencyAlarm(PolynormalsError):
    """A computed result contradicts a proven statement; indicates a bug."""

    exit_code = 3


class MorseViolation(ConsistencyAlarm):
    pass


class SignatureMismatch(ConsistencyAlarm):
    pass


class InconsistentDihedralRole(ConsistencyAlarm):
    pass
