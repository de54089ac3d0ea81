class DbsiError(Exception):
    pass


class TopologyError(DbsiError, ValueError):
    pass


class ConfigError(DbsiError, ValueError):
    pass


class IsolationError(DbsiError, RuntimeError):
    """A node tried to exchange data with a node outside its neighborhood."""


class SimulationError(DbsiError, RuntimeError):
    pass


class EstimatorDivergence(SimulationError):
    """The network-wide norm estimate became nonpositive or non-finite."""
