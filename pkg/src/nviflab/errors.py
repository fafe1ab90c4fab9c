"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid task or experiment configuration."""


class ShapeError(ValueError):
    """Operands with incompatible shapes."""


class ProtocolError(RuntimeError):
    """Caller violated a call-sequence contract (wrong ids, missing state)."""


class StateError(RuntimeError):
    """Component used before it was put into a usable state."""


class DataError(ValueError):
    """Input data that cannot be processed (empty batch, corrupt record)."""
