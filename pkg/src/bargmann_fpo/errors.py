"""Exception and warning classes shared across the package."""


class BargmannFPOError(Exception):
    """Base class for all errors raised by this package."""


class ParameterOrdering(BargmannFPOError, ValueError):
    pass


class DegenerateRates(BargmannFPOError, ValueError):
    pass


class SingularWronskian(BargmannFPOError, ArithmeticError):
    pass


class PoleOfJost(BargmannFPOError, ZeroDivisionError):
    pass


class NodeAtMatching(BargmannFPOError, ArithmeticError):
    """psi(R_cut) vanishes so the logarithmic derivative is undefined."""


class IntegratorFailure(BargmannFPOError, RuntimeError):
    pass


class NoConvergence(BargmannFPOError, RuntimeError):
    pass


class EmptyRegion(BargmannFPOError, ValueError):
    pass


class MisalignedRadius(BargmannFPOError, ValueError):
    pass


class SingularSystem(BargmannFPOError, ArithmeticError):
    pass


class GridTooCoarse(BargmannFPOError, RuntimeError):
    pass


class BranchLoss(NoConvergence):
    """Eigenvalue branch could not be followed by eigenvector overlap."""


class WindowUncovered(BargmannFPOError, ValueError):
    pass


class ConfigError(BargmannFPOError, ValueError):
    pass


class DefectiveSpectrumWarning(UserWarning):
    """Eigenvectors lost biorthogonality, likely near an exceptional point."""
