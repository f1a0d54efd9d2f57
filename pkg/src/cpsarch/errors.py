"""Exception hierarchy shared by all cpsarch modules."""


class CpsArchError(Exception):
    """Base class for every error raised deliberately by cpsarch."""


class ParseError(CpsArchError):
    pass


class SchemaError(CpsArchError):
    pass


class InvalidModel(CpsArchError):
    def __init__(self, violations):
        self.violations = list(violations)
        detail = "; ".join(str(v) for v in self.violations[:5])
        super().__init__(f"model has {len(self.violations)} violation(s): {detail}")


class UnknownSubsystem(CpsArchError):
    pass


class NotZip(CpsArchError):
    pass


class MissingEntry(CpsArchError):
    pass


class XmlError(CpsArchError):
    pass


class DuplicateEntry(CpsArchError):
    pass


class UnknownCategory(CpsArchError):
    pass


class EmptyCorpus(CpsArchError):
    pass


class StlSyntaxError(CpsArchError):
    pass


class UnknownSignal(CpsArchError):
    pass


class BadInterval(CpsArchError):
    pass


class EmptyWindow(CpsArchError):
    pass


class HorizonExceeded(CpsArchError):
    pass


class OutOfRange(CpsArchError):
    pass


class SimulationError(CpsArchError):
    pass


class GridMismatch(SimulationError):
    pass


class NumericOverflow(SimulationError):
    pass
