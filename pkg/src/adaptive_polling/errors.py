class PollingError(Exception):
    """Base class for all package errors."""


class InvalidSpec(PollingError, ValueError):
    pass


class MomentInfinite(PollingError, ValueError):
    pass


class InvalidParams(PollingError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InconsistentInput(PollingError, ValueError):
    pass


class NonFiniteSample(PollingError, RuntimeError):
    pass


class DuplicateSeeds(PollingError, ValueError):
    pass


class InvariantViolation(PollingError, RuntimeError):
    pass


class SaturatedModelRejected(PollingError, ValueError):
    pass


class NotLimitedDiscipline(PollingError, ValueError):
    pass


class InfeasibleRegion(PollingError, ValueError):
    pass


class NotApplicable(PollingError, ValueError):
    pass


class ConfigError(PollingError, ValueError):
    pass


class UnknownScenario(PollingError, KeyError):
    pass


class BadAxis(PollingError, ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


class ValidationError(ConfigError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
