"""Exception hierarchy."""


class QaeKitError(Exception):
    """Base class for all errors raised by qaekit."""


class DimensionError(QaeKitError, ValueError):
    pass


class NotHermitianError(QaeKitError, ValueError):
    def __init__(self, asymmetry: float, tol: float):
        super().__init__(f"matrix is not Hermitian: max|A - A^H| = {asymmetry:.3e} > {tol:.1e}")
        self.asymmetry = asymmetry


class NotADensityOperatorError(QaeKitError, ValueError):
    pass


class NegativeSpectrumError(QaeKitError, ValueError):
    def __init__(self, min_eigenvalue: float, tol: float):
        super().__init__(f"eigenvalue {min_eigenvalue:.3e} is below -{tol:.1e}")
        self.min_eigenvalue = min_eigenvalue


class ConvergenceError(QaeKitError, RuntimeError):
    pass


class ConfigError(QaeKitError, ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.message = message
        self.path = path


class DegenerateCompressionError(QaeKitError, RuntimeError):
    """The encoder sends (almost) all weight outside the kept subspace."""


class ProtocolError(QaeKitError, RuntimeError):
    pass
