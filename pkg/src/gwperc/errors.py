"""Exception hierarchy."""


class GwpercError(Exception):
    pass


class RejectLeaves(GwpercError, ValueError):
    pass


class RejectSubcritical(GwpercError, ValueError):
    pass


class MalformedPmf(GwpercError, ValueError):
    pass


class DomainError(GwpercError, ValueError):
    pass


class UnreachableNode(GwpercError, IndexError):
    pass


class BudgetExceeded(GwpercError, RuntimeError):
    pass


class RunAborted(GwpercError, RuntimeError):
    pass


class InvalidLevels(GwpercError, ValueError):
    pass


class HeightMismatch(GwpercError, ValueError):
    pass


class NotSubtree(GwpercError, ValueError):
    pass


class EnumerationBudget(GwpercError, RuntimeError):
    pass


class UnsupportedRegime(GwpercError, ValueError):
    pass


class EmptyBatch(GwpercError, ValueError):
    pass


class InsufficientSurvivors(GwpercError, ValueError):
    pass


class ConfigError(GwpercError, ValueError):
    pass


class AcceptanceFailure(GwpercError):
    pass
