"""Exception types shared across the solvers."""


class NetVlasovError(Exception):
    pass


class DomainError(NetVlasovError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class ConfigurationError(NetVlasovError, ValueError):
    """Incompatible kernels, modes or sizes."""


class InitializationError(NetVlasovError, ValueError):
    """Initial data violates the declared support."""


class BlowUpError(NetVlasovError, RuntimeError):
    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite state after step {step} (t={t:.6g})")
        self.step = step
        self.t = t
