class ExplorerError(Exception):
    """Base class for every error raised by the explorer package."""


class DataError(ExplorerError, ValueError):
    pass


class TransformError(ExplorerError):
    pass


class EstimatorError(ExplorerError):
    pass


class HpoTimeout(ExplorerError):
    """No hyper-parameter evaluation completed inside the time box."""


class EnsembleError(ExplorerError, ValueError):
    pass


class ExplorationError(ExplorerError):
    pass


class PolicyError(ExplorerError):
    pass


class PolicyDiverged(PolicyError):
    """Weights became non-finite during training."""


class PolicyFileError(PolicyError, ValueError):
    pass


class PolicySchemaError(PolicyFileError):
    pass


class ConfigError(ExplorerError, ValueError):
    pass
