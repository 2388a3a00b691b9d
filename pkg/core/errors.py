"""Exception types raised across the simulator."""

from typing import Optional


class CellFreeError(Exception):
    """Root of every simulator error."""


class ConfigError(CellFreeError, ValueError):
    pass


class InstanceTooLargeError(CellFreeError):
    pass


class MeasurementError(CellFreeError, ValueError):
    pass


class DegenerateVectorError(CellFreeError, ValueError):
    pass


class SolverError(CellFreeError, RuntimeError):
    """Max-min bisection could not complete; carries the last iterate."""

    def __init__(self, message: str, t_lo: float = 0.0, t_hi: float = 0.0,
                 iteration: int = 0, status: Optional[str] = None):
        super().__init__(
            f"{message} (iter={iteration} t_lo={t_lo:.6g} t_hi={t_hi:.6g} status={status})"
        )
        self.t_lo = t_lo
        self.t_hi = t_hi
        self.iteration = iteration
        self.status = status


class DropError(CellFreeError):
    """One campaign drop failed; the campaign is aborted."""
