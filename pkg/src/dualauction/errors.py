"""Exception types raised by the simulator."""


class ConfigError(ValueError):
    """Invalid scenario or run configuration."""


class InvalidArgumentError(ValueError):
    """An operation was called outside its domain."""


class RelayExhaustedError(ValueError):
    """A transaction with no remaining relay hops was relayed."""


class AccountingError(RuntimeError):
    """Internal bookkeeping inconsistency (charges vs receipts, welfare cross-check)."""
