"""Exception hierarchy shared across the package."""


class CuriosityLabError(Exception):
    """Base class for all package errors."""


class ZeroEvidence(CuriosityLabError, ValueError):
    """An observed response is impossible under every type with positive belief."""


class PolicyActionOutOfRange(CuriosityLabError, ValueError):
    pass


class EpisodeOver(CuriosityLabError):
    pass


class RecommendBeforeFinalTurn(CuriosityLabError, ValueError):
    pass


class WrongEnvironment(CuriosityLabError, ValueError):
    pass


class LengthMismatch(CuriosityLabError, ValueError):
    pass


class StateSpaceCapExceeded(CuriosityLabError):
    pass


class WrongArity(CuriosityLabError, ValueError):
    pass


class BudgetExceeded(CuriosityLabError):
    pass


class ConfigError(CuriosityLabError, ValueError):
    pass
