class GraphGameError(Exception):
    exit_code = 2

    def __init__(self, message: str = "", agent: int = None, time: float = None, detail: str = None):
        self.message = message
        self.agent = agent
        self.time = time
        self.detail = detail
        context = []
        if agent is not None:
            context.append(f"agent {agent}")
        if time is not None:
            context.append(f"t={time:.6g}")
        prefix = f"[{', '.join(context)}] " if context else ""
        suffix = f" ({detail})" if detail else ""
        super().__init__(f"{prefix}{message}{suffix}")


class ConfigurationError(GraphGameError):
    exit_code = 1


class ConfigurationNotFound(ConfigurationError):
    pass


class ConfigurationValidationError(ConfigurationError):
    pass


class SpanningTreeError(ConfigurationError):
    pass


class ScenarioNotFound(ConfigurationError):
    pass


class NumericalError(GraphGameError):
    exit_code = 2


class AssumptionViolation(NumericalError):
    pass


class SingularBlockGain(NumericalError):
    pass


class NonFiniteState(NumericalError):
    pass


class LeaderBoundExceeded(NumericalError):
    pass


class WindowError(NumericalError):
    pass


class OracleFailure(GraphGameError):
    exit_code = 2


class TraceWriteError(GraphGameError):
    exit_code = 1


class MissingState(NumericalError):
    pass
