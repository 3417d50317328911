"""Exception types shared across the package."""


class ProtocolError(ValueError):
    """Invalid program, gate, or parameter."""


class NonCliffordGateError(ProtocolError):
    """A non-Clifford gate was handed to the stabilizer engine."""

    def __init__(self, kind, step=None):
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"gate {kind!r}{where} is not supported by the stabilizer engine")
        self.kind = kind
        self.step = step


class CapExceededError(RuntimeError):
    """A dense simulation or contraction would exceed the configured size cap."""

    def __init__(self, message, required=None, cap=None, step=None):
        super().__init__(message)
        self.required = required
        self.cap = cap
        self.step = step


class QuadratureError(RuntimeError):
    """Numerical integration did not reach the requested tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
