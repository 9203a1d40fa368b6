"""Exception types raised across the toolkit."""


class ETTrackError(Exception):
    pass


class NonHurwitz(ETTrackError, ValueError):
    def __init__(self, eigenvalue):
        self.eigenvalue = eigenvalue
        super().__init__(f"matrix is not Hurwitz: eigenvalue {eigenvalue} has real part >= 0")


class DimensionMismatch(ETTrackError, ValueError):
    pass


class RegionUnbounded(ETTrackError, ValueError):
    pass


class InvalidInterval(ETTrackError, ValueError):
    pass


class ThresholdUndefined(ETTrackError, ArithmeticError):
    pass


class SimulationError(ETTrackError, RuntimeError):
    pass


class NumericalBlowup(SimulationError):
    pass


class ZenoSuspected(SimulationError):
    pass


class InvariantViolation(SimulationError):
    def __init__(self, message, record=None):
        self.record = record
        super().__init__(message)
