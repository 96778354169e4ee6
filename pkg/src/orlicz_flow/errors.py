"""Exception hierarchy shared by every module of the package."""


class OrliczFlowError(Exception):
    """Base class for all package errors."""


class InvalidGridError(OrliczFlowError, ValueError):
    pass


class NonPositiveSupportError(OrliczFlowError, ValueError):
    def __init__(self, node, value):
        self.node = int(node)
        self.value = float(value)
        super().__init__(f"support function not positive: h[{self.node}] = {self.value!r}")


class NonConvexError(OrliczFlowError, ValueError):
    def __init__(self, node, value, threshold=0.0):
        self.node = int(node)
        self.value = float(value)
        self.threshold = float(threshold)
        super().__init__(
            f"body not strictly convex: w[{self.node}] = {self.value!r} "
            f"(must exceed {self.threshold!r})"
        )


class NotEvenError(OrliczFlowError, ValueError):
    """Input data is not origin symmetric (odd modes present)."""


class DegenerateFamilyError(OrliczFlowError, ValueError):
    pass


class IndeterminateClassError(OrliczFlowError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class QuadratureError(OrliczFlowError, RuntimeError):
    def __init__(self, message, error_estimate=float("nan")):
        self.error_estimate = float(error_estimate)
        super().__init__(f"{message} (achieved error estimate {self.error_estimate:.3g})")


class HypothesisViolatedError(OrliczFlowError, RuntimeError):
    pass


class FlowBreakdownError(OrliczFlowError, RuntimeError):
    """Raised when the step guards reject too many times.

    Carries the last accepted state and, when raised out of ``run``, the
    diagnostics history collected so far.
    """

    def __init__(self, message, state=None, history=None):
        self.state = state
        self.history = list(history) if history is not None else []
        super().__init__(message)


class ExperimentInconclusiveError(OrliczFlowError, RuntimeError):
    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class ConfigError(OrliczFlowError, ValueError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class SnapshotError(OrliczFlowError, ValueError):
    pass
