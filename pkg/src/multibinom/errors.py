"""Exception hierarchy shared by every module of the pricing engine."""


class PricingError(Exception):
    """Base class for all engine errors."""


class ParameterError(PricingError, ValueError):
    pass


class ArbitrageViolation(ParameterError):
    """Some asset violates 0 < D_i < R < U_i."""


class DimensionError(ParameterError):
    pass


class NonpositivePrice(ParameterError):
    pass


class IndexOutOfRange(PricingError, IndexError):
    pass


class LevelOverflow(PricingError):
    """A successor was requested for a terminal node."""


class DimensionMismatch(PricingError, ValueError):
    pass


class InvalidMeasure(PricingError, ValueError):
    pass


class ZeroMassEvent(PricingError):
    """Conditioning on an event of probability zero."""


class PrefixLevelMismatch(PricingError, ValueError):
    pass


class Infeasible(PricingError):
    pass


class Unbounded(PricingError):
    pass


class BudgetExceeded(PricingError):
    """The instance is larger than the configured computational cap."""


class NotSorted(PricingError, ValueError):
    pass


class OutOfRange(PricingError, ValueError):
    pass


class MassOverflow(PricingError):
    """The lower vertex measure needs sum(b) <= 1."""


class WrongDimension(PricingError, ValueError):
    pass


class WeightError(PricingError, ValueError):
    pass


class KindMismatch(PricingError, TypeError):
    pass


class CertificationError(PricingError):
    """A closed-form route was requested for an uncertified payoff."""
