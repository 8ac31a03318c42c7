"""Frequency grids on the one-sided band ``[0, pi/Ts)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadRange, FrequencyNotOnGrid, GridMismatch

#: relative shrink applied when the requested top frequency equals Nyquist
NYQUIST_CLAMP = 1e-9


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing frequencies (rad/s) below the Nyquist rate."""

    Ts: float
    omegas: np.ndarray
    spacing: str = "log"

    def __post_init__(self):
        om = np.asarray(self.omegas, dtype=float).reshape(-1)
        object.__setattr__(self, "omegas", om)
        if self.Ts <= 0:
            raise BadRange(f"Ts must be positive, got {self.Ts}")
        if om.size == 0:
            raise BadRange("grid is empty")
        if np.any(np.diff(om) <= 0):
            raise BadRange("grid frequencies must be strictly increasing")
        if om[0] < 0 or om[-1] >= np.pi / self.Ts:
            raise BadRange("grid frequencies must lie in [0, pi/Ts)")

    def __len__(self) -> int:
        return self.omegas.size

    @property
    def nyquist(self) -> float:
        return np.pi / self.Ts

    @property
    def z(self) -> np.ndarray:
        """Points ``e^{j omega Ts}`` on the unit circle."""
        return np.exp(1j * self.omegas * self.Ts)

    def index_of(self, omega: float, rtol: float = 1e-9) -> int:
        k = int(np.argmin(np.abs(self.omegas - omega)))
        if abs(self.omegas[k] - omega) > rtol * max(1.0, abs(omega)):
            raise FrequencyNotOnGrid(f"omega={omega!r} is not a grid frequency")
        return k

    def same_as(self, other: "FrequencyGrid") -> bool:
        return (
            self.Ts == other.Ts
            and self.omegas.shape == other.omegas.shape
            and np.array_equal(self.omegas, other.omegas)
        )

    def require_same(self, other: "FrequencyGrid") -> None:
        if not self.same_as(other):
            raise GridMismatch("frequency grids differ")

    def quadrature_weights(self) -> np.ndarray:
        """Weights ``q`` such that ``sum(q * f)`` approximates the H2 integral.

        Convention: ``(Ts/pi) * int_0^{pi/Ts} f(omega) d omega``, i.e. the
        one-sided integral doubled, which equals the two-sided
        ``(1/2pi) int_{-pi}^{pi}`` over normalized frequency. Trapezoidal
        rule on the grid, extended to 0 and to pi/Ts by holding the end values.
        """
        t = np.concatenate([[0.0], self.omegas, [self.nyquist]])
        w = np.zeros(t.size)
        dt = np.diff(t)
        w[:-1] += dt / 2
        w[1:] += dt / 2
        inner = w[1:-1].copy()
        inner[0] += w[0]
        inner[-1] += w[-1]
        return inner * self.Ts / np.pi


def make_log_grid(w_min: float, w_max: float, n: int, Ts: float) -> FrequencyGrid:
    """``n`` log-spaced frequencies in ``[w_min, w_max]``, clamped below Nyquist."""
    nyq = np.pi / Ts
    if Ts <= 0 or not (0 < w_min < w_max) or w_max > nyq * (1 + 1e-12) or n < 1:
        raise BadRange(f"bad log grid: w_min={w_min}, w_max={w_max}, n={n}, Ts={Ts}")
    if n == 1:
        return FrequencyGrid(Ts, np.array([w_min]), "log")
    om = np.logspace(np.log10(w_min), np.log10(w_max), n)
    om[0] = w_min
    om[-1] = min(w_max, (1 - NYQUIST_CLAMP) * nyq)
    return FrequencyGrid(Ts, om, "log")


def make_linear_grid(w_min: float, w_max: float, n: int, Ts: float) -> FrequencyGrid:
    nyq = np.pi / Ts
    if Ts <= 0 or not (0 <= w_min < w_max) or w_max > nyq * (1 + 1e-12) or n < 2:
        raise BadRange(f"bad linear grid: w_min={w_min}, w_max={w_max}, n={n}, Ts={Ts}")
    om = np.linspace(w_min, w_max, n)
    om[-1] = min(w_max, (1 - NYQUIST_CLAMP) * nyq)
    return FrequencyGrid(Ts, om, "linear")
