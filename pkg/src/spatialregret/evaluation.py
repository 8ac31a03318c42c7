"""Closed-loop frequency responses, norms, spatial regret and time-domain
disturbance experiments.

H2 convention: ``||T||_2^2 = (Ts/pi) int_0^{pi/Ts} trace(T* T) d omega``, the
one-sided integral doubled, which equals the impulse-response energy
``sum_k ||h_k||_F^2`` of a real system.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    BadChannel,
    GridMismatch,
    SingularReturnDifference,
    UnstableClosedLoop,
)
from .frf import GeneralizedPlantFrf
from .grid import FrequencyGrid
from .hermitian import ctranspose, left_inverse, right_inverse, sigma_max
from .lti import StateSpaceModel, feedback_interconnection, simulate
from .structure import ControllerFactors, check_y_invertible, realize_factors

RETURN_COND_MAX = 1e10
H2_CONVENTION = "h2^2 = (Ts/pi) * int_0^{pi/Ts} trace(T*T) domega = sum_k ||h_k||_F^2"


@dataclass(frozen=True)
class ClosedLoopFrf:
    grid: FrequencyGrid
    data: np.ndarray  # (nf, n_z, n_w)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.ndim != 3 or data.shape[0] != len(self.grid):
            raise ValueError(f"expected ({len(self.grid)}, n_z, n_w) samples, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("closed-loop samples must be finite")
        object.__setattr__(self, "data", data)


def closed_loop_frf(plant: GeneralizedPlantFrf, K: np.ndarray) -> ClosedLoopFrf:
    """``T = G11 + G12 K (I - G22 K)^{-1} G21`` per frequency."""
    K = np.asarray(K, dtype=complex)
    if K.ndim == 2:
        K = np.broadcast_to(K, (len(plant.grid),) + K.shape)
    R = np.eye(plant.p) - plant.G22 @ K
    cond = np.linalg.cond(R)
    bad = ~np.isfinite(cond) | (cond >= RETURN_COND_MAX)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SingularReturnDifference(float(plant.grid.omegas[i]), float(cond[i]))
    T = plant.G11 + plant.G12 @ K @ np.linalg.solve(R, plant.G21)
    return ClosedLoopFrf(plant.grid, T)


def closed_loop_via_factors(
    plant: GeneralizedPlantFrf, factors: ControllerFactors | tuple[np.ndarray, np.ndarray]
) -> ClosedLoopFrf:
    """Closed loop from the factors: ``T = Phi^R (Phi G11 + X G21) + Psi G11``.

    ``factors`` is either a :class:`ControllerFactors` or sampled ``(X, Y)``.
    """
    if isinstance(factors, ControllerFactors):
        maps = realize_factors(factors.param, plant.grid)
        X, Y = maps.X(factors.theta), maps.Y(factors.theta)
    else:
        X, Y = (np.asarray(a, dtype=complex) for a in factors)
    check_y_invertible(Y, plant.grid)
    G12L = left_inverse(plant.G12)
    Phi = (Y - X @ plant.G22) @ G12L
    Psi = np.eye(plant.n_z) - plant.G12 @ G12L
    E = Phi @ plant.G11 + X @ plant.G21
    T = right_inverse(Phi) @ E + Psi @ plant.G11
    return ClosedLoopFrf(plant.grid, T)


def hinf_norm(T: ClosedLoopFrf) -> float:
    """Grid maximum of the largest singular value (a lower bound of the true norm)."""
    return float(np.max(sigma_max(T.data)))


def h2_norm(T: ClosedLoopFrf) -> float:
    """Square root of the quadrature of ``trace(T* T)``; see module docstring."""
    q = T.grid.quadrature_weights()
    tr = np.sum(np.abs(T.data) ** 2, axis=(1, 2))
    return float(np.sqrt(q @ tr))


@dataclass
class RegretReport:
    grid: FrequencyGrid
    lam_max: np.ndarray
    tol: float = 1e-6

    @property
    def value(self) -> float:
        return float(np.max(self.lam_max))

    @property
    def argmax_omega(self) -> float:
        return float(self.grid.omegas[int(np.argmax(self.lam_max))])

    @property
    def well_posed(self) -> bool:
        return self.value >= -self.tol


def regret_matrix(T: np.ndarray, T_hat: np.ndarray) -> np.ndarray:
    return ctranspose(T) @ T - ctranspose(T_hat) @ T_hat


def spatial_regret_value(T: ClosedLoopFrf, T_hat: ClosedLoopFrf, tol: float = 1e-6) -> RegretReport:
    """Grid sup of ``lambda_max(T* T - T_hat* T_hat)``."""
    if not T.grid.same_as(T_hat.grid):
        raise GridMismatch("T and T_hat are sampled on different grids")
    if T.data.shape != T_hat.data.shape:
        raise GridMismatch(f"shape mismatch {T.data.shape} vs {T_hat.data.shape}")
    Lam = regret_matrix(T.data, T_hat.data)
    Lam = 0.5 * (Lam + ctranspose(Lam))
    return RegretReport(T.grid, np.linalg.eigvalsh(Lam)[:, -1], tol)


def worst_case_frequency_gain(T: ClosedLoopFrf, omega: float) -> float:
    """``sigma_max(T(e^{jw}))^2``: worst unit-power sinusoidal disturbance at ``omega``."""
    k = T.grid.index_of(omega)
    return float(sigma_max(T.data[k]) ** 2)


def worst_case_sweep(T: ClosedLoopFrf) -> np.ndarray:
    return sigma_max(T.data) ** 2


def _check_channel(T: ClosedLoopFrf, col: int) -> None:
    if not (0 <= col < T.data.shape[2]):
        raise BadChannel(f"channel {col} outside 0..{T.data.shape[2] - 1}")


def column_energy_gain(T: ClosedLoopFrf, col: int, omega: float) -> float:
    """``||T[:, col](e^{jw})||^2`` (0-based ``col``).

    A sinusoid of unit amplitude in channel ``col`` produces a steady-state
    time-averaged ``||z||^2`` of half this value for ``0 < omega < pi/Ts``.
    """
    _check_channel(T, col)
    k = T.grid.index_of(omega)
    return float(np.sum(np.abs(T.data[k, :, col]) ** 2))


def column_energy_sweep(T: ClosedLoopFrf, col: int) -> np.ndarray:
    _check_channel(T, col)
    return np.sum(np.abs(T.data[:, :, col]) ** 2, axis=1)


# ---------------------------------------------------------------------------
# time domain


@dataclass(frozen=True)
class DisturbanceSpec:
    """Sum of sinusoids ``a sin(w t Ts + phi)`` injected in each listed channel."""

    channels: tuple[int, ...]
    tones: tuple[tuple[float, float, float], ...]  # (omega rad/s, amplitude, phase)
    T: int
    Ts: float

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "tones", tuple(tuple(map(float, t)) for t in self.tones))
        nyq = np.pi / self.Ts
        for om, _, _ in self.tones:
            if not (0 <= om < nyq):
                raise ValueError(f"tone at {om} rad/s is not below Nyquist {nyq}")
        if self.T < 1:
            raise ValueError("horizon T must be positive")

    @property
    def fundamental_period(self) -> float:
        """Period (s) of the lowest nonzero tone frequency."""
        freqs = [om for om, _, _ in self.tones if om > 0]
        return 2 * np.pi / min(freqs) if freqs else 0.0

    def signal(self, n_w: int) -> np.ndarray:
        t = np.arange(self.T) * self.Ts
        s = np.zeros(self.T)
        for om, a, ph in self.tones:
            s += a * np.sin(om * t + ph)
        w = np.zeros((self.T, n_w))
        for c in self.channels:
            if not (0 <= c < n_w):
                raise BadChannel(f"disturbance channel {c} outside 0..{n_w - 1}")
            w[:, c] = s
        return w


@dataclass
class EnergyTrace:
    z_norm_sq: np.ndarray  # (T,)
    window_start: int

    @property
    def window(self) -> np.ndarray:
        return self.z_norm_sq[self.window_start :]

    @property
    def average(self) -> float:
        """Time-averaged ``||z_t||^2`` over the steady-state window."""
        return float(np.mean(self.window))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "z_norm_sq"])
            for t, v in enumerate(self.z_norm_sq):
                writer.writerow([t, f"{v:.17g}"])


TRANSIENT_PERIODS = 10
MIN_AVERAGING_PERIODS = 40


def transient_steps(d: DisturbanceSpec, spectral_radius: float, settle_tol: float = 1e-6) -> int:
    """Steps discarded before averaging.

    At least ``TRANSIENT_PERIODS`` periods of the lowest tone, extended until
    the slowest closed-loop mode has decayed by ``settle_tol``.
    """
    periods = int(np.ceil(TRANSIENT_PERIODS * d.fundamental_period / d.Ts))
    settle = 0
    if 0 < spectral_radius < 1:
        settle = int(np.ceil(np.log(settle_tol) / np.log(spectral_radius)))
    return max(periods, settle)


def default_horizon(period: float, Ts: float, transient: int, periods: int = 100) -> int:
    """Horizon covering ``transient`` steps plus ``periods`` periods of length ``period``."""
    return transient + int(np.ceil(periods * period / Ts))


def time_domain_experiment(
    model: StateSpaceModel,
    controller: StateSpaceModel,
    d: DisturbanceSpec,
    window_start: int | None = None,
    settle_tol: float = 1e-6,
) -> EnergyTrace:
    """Simulate ``u = K y`` against the generalized plant under the disturbance ``d``."""
    cl = feedback_interconnection(model, controller)
    rho = cl.spectral_radius()
    if rho >= 1:
        raise UnstableClosedLoop(rho)
    if window_start is None:
        window_start = transient_steps(d, rho, settle_tol)
    if window_start >= d.T:
        raise ValueError(f"horizon {d.T} is shorter than the transient window {window_start}")
    w = d.signal(model.n_w)
    cl_w = StateSpaceModel(cl.A, cl.B, cl.C, cl.D, cl.Ts, n_w=cl.n_inputs, n_z=cl.n_outputs)
    trace = simulate(cl_w, w=w, T=d.T)
    zsq = np.sum(trace.z**2, axis=1)
    return EnergyTrace(zsq, int(window_start))


def percent_reduction(trace: EnergyTrace, baseline: EnergyTrace) -> float:
    """``100 (1 - ||z|| / ||z_baseline||)`` over the common post-transient record."""
    start = max(trace.window_start, baseline.window_start)
    n = min(trace.z_norm_sq.size, baseline.z_norm_sq.size)
    a = np.sqrt(np.sum(trace.z_norm_sq[start:n]))
    b = np.sqrt(np.sum(baseline.z_norm_sq[start:n]))
    return float(100.0 * (1.0 - a / b))


def write_sweep_csv(path, grid: FrequencyGrid, values: Sequence[float]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega", "value"])
        for om, v in zip(grid.omegas, values):
            writer.writerow([f"{om:.17g}", f"{float(v):.17g}"])

