"""Exception hierarchy shared by all modules."""


class SpiralError(Exception):
    """Base class for every error raised by the toolkit."""


# linear algebra
class NonSquare(SpiralError):
    pass


class ConvergenceFailure(SpiralError):
    pass


class Overflow(SpiralError):
    pass


class InvalidGrid(SpiralError):
    pass


class MissingInput(SpiralError):
    pass


# flows
class StepUnderflow(SpiralError):
    pass


class Diverged(SpiralError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class EmptySample(SpiralError):
    pass


class BetaOutOfRange(SpiralError):
    pass


# domains
class DimensionMismatch(SpiralError):
    pass


class NotAbsorbed(SpiralError):
    pass


# refuter
class VerificationFailed(SpiralError):
    pass


class NearDefective(SpiralError):
    pass


class SearchExhausted(SpiralError):
    pass


# linearize
class NoConvergence(SpiralError):
    pass


class HypothesisViolated(SpiralError):
    pass


class NormalizationMissing(SpiralError):
    pass


class InjectivityViolation(SpiralError):
    pass


# autos
class OddDimension(SpiralError):
    pass


# cli
class ConfigError(SpiralError):
    pass
