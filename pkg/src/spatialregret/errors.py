"""Exception types raised across the package."""


class SpatialRegretError(Exception):
    """Base class for all package errors."""


class RankDeficient(SpatialRegretError):
    def __init__(self, sigma_min: float, sigma_max: float):
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max
        super().__init__(
            f"matrix is rank deficient: sigma_min={sigma_min:.3e}, sigma_max={sigma_max:.3e}"
        )


class DimensionMismatch(SpatialRegretError):
    pass


class PoleOnGrid(SpatialRegretError):
    def __init__(self, omega: float):
        self.omega = omega
        super().__init__(f"e^(j*omega*Ts) is an eigenvalue of A at omega={omega!r}")


class IllPosedInterconnection(SpatialRegretError):
    pass


class SingularDY(SpatialRegretError):
    pass


class BadRange(SpatialRegretError):
    pass


class SingularInputSpectrum(SpatialRegretError):
    def __init__(self, omega: float, cond: float):
        self.omega = omega
        self.cond = cond
        super().__init__(f"input spectrum singular at omega={omega!r} (cond={cond:.3e})")


class GridMismatch(SpatialRegretError):
    pass


class BadEdge(SpatialRegretError):
    pass


class BadPole(SpatialRegretError):
    pass


class ImproperEntry(SpatialRegretError):
    pass


class NotASuperset(SpatialRegretError):
    pass


class SingularReturnDifference(SpatialRegretError):
    def __init__(self, omega: float, cond: float):
        self.omega = omega
        self.cond = cond
        super().__init__(f"I - G22 K is singular at omega={omega!r} (cond={cond:.3e})")


class SingularY(SpatialRegretError):
    def __init__(self, omega: float):
        self.omega = omega
        super().__init__(f"Y(e^jw) is singular at omega={omega!r}")


class FrequencyNotOnGrid(SpatialRegretError):
    pass


class BadChannel(SpatialRegretError):
    pass


class UnstableClosedLoop(SpatialRegretError):
    def __init__(self, spectral_radius: float):
        self.spectral_radius = spectral_radius
        super().__init__(f"closed loop is unstable (spectral radius {spectral_radius:.6f})")


class SynthesisError(SpatialRegretError):
    """Failure inside the outer iteration; carries the partial report."""

    def __init__(self, message: str, iteration: int, report=None):
        self.iteration = iteration
        self.report = report
        super().__init__(f"iteration {iteration}: {message}")


class SolverFailed(SynthesisError):
    pass


class StabilityLost(SynthesisError):
    pass


class ConfigError(SpatialRegretError):
    pass
