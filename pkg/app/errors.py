"""
Exception hierarchy shared by the CLI, the services and the HTTP routes
"""


class RumorLabError(Exception):
    """Base class for every error raised on purpose by the lab"""


class ConfigurationError(RumorLabError, ValueError):
    """Invalid parameters: population size, edge probability, law, model name"""


class DomainError(RumorLabError, ValueError):
    """A request outside the mathematical domain of an operation"""


class OracleInfeasibleError(RumorLabError, RuntimeError):
    """The exact enumeration would exceed its size or depth cap"""


class ScanLimitError(RumorLabError, RuntimeError):
    """A Bernoulli scan hit its safety cap before finding enough open edges"""


class InvariantViolation(RumorLabError, RuntimeError):
    """An internal consistency check failed after a run"""


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the process exit code"""
    if isinstance(exc, ValueError):
        return EXIT_USAGE
    return EXIT_RUNTIME
