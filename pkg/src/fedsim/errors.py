"""Exception types shared across the simulator."""


class FedSimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(FedSimError):
    """Invalid configuration. ``errors`` lists one message per offending field."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class IdxParseError(FedSimError):
    """Malformed IDX file. Message names the file and byte offset."""

    def __init__(self, path, offset, message):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"{self.path} (offset {offset}): {message}")


class NumericError(FedSimError):
    """Non-finite value encountered during training or aggregation."""


class ProtocolError(FedSimError):
    """Secure-aggregation message out of order or malformed."""


class RoundAbandoned(FedSimError):
    """Raised when a round cannot produce an aggregate (no accepted clients)."""
