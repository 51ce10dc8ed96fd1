"""Exception types shared across the package."""


class ContractViolationError(ValueError):
    """An operation was called with arguments violating its contract."""


class UndefinedAngleError(ContractViolationError):
    """A cosine was requested for a zero-norm vector."""


class NumericalFailureError(RuntimeError):
    """An iterative scheme failed to converge within its iteration cap."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ConfigurationError(ValueError):
    """A rule or run configuration is malformed or incompatible."""


class UnknownLayerError(KeyError):
    """A layer name was not found in the network."""


class BundleError(ValueError):
    """Base class for model-bundle load failures."""


class ManifestError(BundleError):
    """The bundle manifest is missing, unparsable, or inconsistent."""


class MissingTensorError(BundleError):
    """A tensor referenced by the manifest is absent from the blob."""


class TensorShapeError(BundleError):
    """A stored tensor does not match the shape required by its layer."""
