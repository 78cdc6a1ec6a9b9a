"""Exception and warning types raised across the package."""


class WeakKuboError(Exception):
    pass


class DimensionError(WeakKuboError, ValueError):
    pass


class NotHermitianError(WeakKuboError, ValueError):
    pass


class InvalidScenarioError(WeakKuboError, ValueError):
    """Raised when a scenario fails validation; ``findings`` lists why."""

    def __init__(self, findings):
        self.findings = list(findings)
        super().__init__("; ".join(str(f) for f in self.findings) or "invalid scenario")


class ConfigError(WeakKuboError, ValueError):
    pass


class PostselectionFloorError(WeakKuboError, ArithmeticError):
    """Postselection probability (or weak-value denominator) below the floor."""


class RegimeBreakdownError(WeakKuboError, ArithmeticError):
    """The perturbative denominator is not positive."""


class NonperturbativeWarning(UserWarning):
    pass
