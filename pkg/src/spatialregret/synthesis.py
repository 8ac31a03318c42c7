"""Frequency-gridded controller synthesis by sequential convexification.

With ``K = Y^{-1} X`` define ``Phi = (Y - X G22) G12^L`` and
``Psi = I - G12 G12^L``. Per frequency the closed loop satisfies
``T* T ⪯ Gamma`` iff

    [[Gamma - (Psi G11)* (Psi G11), E*], [E, Phi Phi*]] ⪰ 0,  E = Phi G11 + X G21.

The quadratic ``Phi Phi*`` is replaced by its affine minorant around the
current iterate ``Phi_c``: ``Phi_c Phi* + Phi Phi_c* - Phi_c Phi_c*``. The
previous iterate stays feasible, so the objective never increases, and a
positive-definite linearized block keeps the iterate stabilizing.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    GridMismatch,
    NotASuperset,
    SingularDY,
    SolverFailed,
    StabilityLost,
)
from .evaluation import ClosedLoopFrf, closed_loop_frf, h2_norm, hinf_norm
from .frf import GeneralizedPlantFrf
from .hermitian import ctranspose, left_inverse
from .lti import StateSpaceModel, closed_loop_spectral_radius, realize_controller
from .sdp import OPTIMAL, LmiBlock, SdpProblem, SolverSettings, solve_sdp
from .structure import (
    ControllerFactors,
    FactorMaps,
    FactorParameterization,
    SparsityPattern,
    build_factor_parameterization,
    realize_factors,
    zero_controller_theta,
)

log = logging.getLogger(__name__)

H2, HINF, REGRET = "h2", "hinf", "regret"


@dataclass(frozen=True)
class PhiMaps:
    """Linear map ``theta -> Phi`` and the constants ``Phi_c``, ``Psi`` on a grid."""

    factor_maps: FactorMaps
    G12L: np.ndarray  # (nf, m, n_z)
    Phi_coef: np.ndarray  # (nf, n_theta, m, n_z)
    E_coef: np.ndarray  # (nf, n_theta, m, n_w), E = Phi G11 + X G21
    Phi_c: np.ndarray  # (nf, m, n_z)
    Psi: np.ndarray  # (nf, n_z, n_z)
    theta_c: np.ndarray

    @property
    def grid(self):
        return self.factor_maps.grid

    def Phi(self, theta) -> np.ndarray:
        return np.einsum("fkij,k->fij", self.Phi_coef, np.asarray(theta, dtype=float))

    def E(self, theta) -> np.ndarray:
        return np.einsum("fkij,k->fij", self.E_coef, np.asarray(theta, dtype=float))


def build_phi_maps(plant: GeneralizedPlantFrf, maps: FactorMaps, theta_c) -> PhiMaps:
    plant.grid.require_same(maps.grid)
    theta_c = np.asarray(theta_c, dtype=float).reshape(-1).copy()
    G12L = left_inverse(plant.G12)
    Xc = np.moveaxis(maps.X_coef, -1, 1)  # (nf, n_theta, m, p)
    Yc = np.moveaxis(maps.Y_coef, -1, 1)
    Phi_coef = (Yc - Xc @ plant.G22[:, None]) @ G12L[:, None]
    E_coef = Phi_coef @ plant.G11[:, None] + Xc @ plant.G21[:, None]
    Phi_c = np.einsum("fkij,k->fij", Phi_coef, theta_c)
    Psi = np.eye(plant.n_z) - plant.G12 @ G12L
    return PhiMaps(maps, G12L, Phi_coef, E_coef, Phi_c, Psi, theta_c)


def linearized_block(maps: PhiMaps, theta) -> np.ndarray:
    """``Phi_c Phi* + Phi Phi_c* - Phi_c Phi_c*`` per frequency."""
    Phi = maps.Phi(theta)
    Pc = maps.Phi_c
    return Pc @ ctranspose(Phi) + Phi @ ctranspose(Pc) - Pc @ ctranspose(Pc)


def _hermitian_basis(n: int) -> np.ndarray:
    """Real basis of ``n x n`` Hermitian matrices: diagonal, Re and Im off-diagonals."""
    mats = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1
        mats.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = 1
            mats.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j], e[j, i] = -1j, 1j
            mats.append(e)
    return np.array(mats)


def _assemble(
    plant: GeneralizedPlantFrf, maps: PhiMaps, UL_const: np.ndarray, per_freq_gamma: bool
) -> SdpProblem:
    nf, n_theta = maps.Phi_coef.shape[:2]
    n_w, m = plant.n_w, plant.m
    d = n_w + m
    g_idx = n_theta
    n_gamma_loc = n_w * n_w if per_freq_gamma else 0
    n_vars = n_theta + 1 + nf * n_gamma_loc

    Pc = maps.Phi_c[:, None]  # (nf, 1, m, n_z)
    LR_coef = Pc @ ctranspose(maps.Phi_coef) + maps.Phi_coef @ ctranspose(Pc)
    LR_const = -maps.Phi_c @ ctranspose(maps.Phi_c)

    L = n_theta + (n_gamma_loc if per_freq_gamma else 1)
    coeffs = np.zeros((nf, L, d, d), dtype=complex)
    coeffs[:, :n_theta, n_w:, :n_w] = maps.E_coef
    coeffs[:, :n_theta, :n_w, n_w:] = ctranspose(maps.E_coef)
    coeffs[:, :n_theta, n_w:, n_w:] = LR_coef
    if per_freq_gamma:
        coeffs[:, n_theta:, :n_w, :n_w] = _hermitian_basis(n_w)
    else:
        coeffs[:, n_theta, :n_w, :n_w] = np.eye(n_w)
    const = np.zeros((nf, d, d), dtype=complex)
    const[:, :n_w, :n_w] = UL_const
    const[:, n_w:, n_w:] = LR_const

    blocks = []
    theta_idx = np.arange(n_theta)
    for f in range(nf):
        if per_freq_gamma:
            loc = n_theta + 1 + f * n_gamma_loc + np.arange(n_gamma_loc)
            idx = np.concatenate([theta_idx, loc])
        else:
            idx = np.concatenate([theta_idx, [g_idx]])
        blocks.append(LmiBlock(float(plant.grid.omegas[f]), const[f], idx, coeffs[f]))

    c = np.zeros(n_vars)
    c[g_idx] = 1.0
    layout = {"theta": slice(0, n_theta), "gamma": slice(g_idx, g_idx + 1)}
    A_eq = b_eq = None
    if per_freq_gamma:
        layout["Gamma"] = slice(n_theta + 1, n_vars)
        # gamma = sum_f q_f trace(Gamma_f)
        q = plant.grid.quadrature_weights()
        A_eq = np.zeros((1, n_vars))
        A_eq[0, g_idx] = 1.0
        for f in range(nf):
            base = n_theta + 1 + f * n_gamma_loc
            A_eq[0, base : base + n_w] = -q[f]
        b_eq = np.zeros(1)
    return SdpProblem(c, blocks, layout, A_eq, b_eq, reg_index=theta_idx)


def _psi_term(plant: GeneralizedPlantFrf, maps: PhiMaps) -> np.ndarray:
    PG = maps.Psi @ plant.G11
    return ctranspose(PG) @ PG


def build_norm_lmi(plant: GeneralizedPlantFrf, maps: PhiMaps, objective: str) -> SdpProblem:
    """H-infinity (``Gamma = gamma I``) or H2 (per-frequency Hermitian ``Gamma``)."""
    if objective not in (H2, HINF):
        raise ValueError(f"objective must be {H2!r} or {HINF!r}, got {objective!r}")
    return _assemble(plant, maps, -_psi_term(plant, maps), per_freq_gamma=objective == H2)


@dataclass(frozen=True)
class OracleData:
    factors: ControllerFactors
    T_hat: ClosedLoopFrf
    objective: str
    value: float
    pattern: SparsityPattern | None = None


@dataclass(frozen=True)
class SpatialRegret:
    oracle: OracleData


def build_regret_lmi(plant: GeneralizedPlantFrf, maps: PhiMaps, oracle: OracleData | ClosedLoopFrf) -> SdpProblem:
    """Upper-left block ``gamma I + T_hat* T_hat - (Psi G11)* (Psi G11)``."""
    T_hat = oracle.T_hat if isinstance(oracle, OracleData) else oracle
    if not T_hat.grid.same_as(plant.grid):
        raise GridMismatch("oracle response is sampled on a different grid than the plant")
    Th = T_hat.data
    return _assemble(plant, maps, ctranspose(Th) @ Th - _psi_term(plant, maps), per_freq_gamma=False)


# ---------------------------------------------------------------------------
# stability evidence


def winding_number(values: np.ndarray) -> int:
    """Net encirclements of the origin by a real-rational function over the full circle,
    from samples on ``(0, pi/Ts)`` (conjugate symmetry doubles the half-circle)."""
    ang = np.angle(values)
    total = np.sum(np.angle(np.exp(1j * np.diff(ang))))
    return int(np.round(total / np.pi))


def return_difference_det(maps: FactorMaps, plant: GeneralizedPlantFrf, theta) -> np.ndarray:
    X, Y = maps.X(theta), maps.Y(theta)
    return np.linalg.det(Y - X @ plant.G22)


@dataclass
class IterationRecord:
    iteration: int
    gamma: float
    status: str
    solve_time: float
    solver_iterations: int
    psd_residual: float
    spectral_radius: float
    winding: int
    margin: float
    y_sv_min: float


@dataclass
class SynthesisConfig:
    max_iter: int = 30
    rel_tol: float = 1e-4
    tol_feas: float = 1e-7
    tol_gap: float = 1e-7
    solver_max_iter: int = 200
    regularization: float = 0.0
    monotone_slack: float = 1e-6
    y_sv_tol: float = 1e-8
    verbose: bool = False

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(
            tol_feas=self.tol_feas,
            tol_gap=self.tol_gap,
            max_iter=self.solver_max_iter,
            regularization=self.regularization,
            verbose=self.verbose,
        )


@dataclass
class SynthesisReport:
    objective: str
    config: SynthesisConfig
    records: list[IterationRecord] = field(default_factory=list)
    factors: ControllerFactors | None = None
    last_stable: ControllerFactors | None = None
    initial_spectral_radius: float = float("nan")
    converged: bool = False

    @property
    def gammas(self) -> np.ndarray:
        return np.array([r.gamma for r in self.records])

    def __len__(self) -> int:
        return len(self.records)

    def monotone(self, slack: float | None = None) -> bool:
        slack = self.config.monotone_slack if slack is None else slack
        g = self.gammas
        return bool(np.all(g[1:] <= g[:-1] + slack * np.maximum(1.0, np.abs(g[:-1]))))

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "converged": self.converged,
            "monotone": self.monotone() if self.records else True,
            "initial_spectral_radius": self.initial_spectral_radius,
            "config": asdict(self.config),
            "iterations": [
                {k: v for k, v in asdict(r).items() if k != "solve_time"} for r in self.records
            ],
            "theta": None if self.factors is None else self.factors.theta.tolist(),
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True, default=_json_float)
            fh.write("\n")

    def write_history_csv(self, path, include_timing: bool = False) -> None:
        """``iter,gamma,solve_time,spectral_radius``; ``solve_time`` is ``nan`` unless
        ``include_timing`` so that reruns stay byte-identical."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "gamma", "solve_time", "spectral_radius"])
            for r in self.records:
                st = f"{r.solve_time:.17g}" if include_timing else "nan"
                writer.writerow(
                    [r.iteration, f"{r.gamma:.17g}", st, f"{r.spectral_radius:.17g}"]
                )


def _json_float(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(type(x))


def _objective_kind(objective) -> str:
    if isinstance(objective, SpatialRegret):
        return REGRET
    if objective in (H2, HINF):
        return objective
    raise ValueError(f"unknown objective {objective!r}")


def _certify(
    plant, fmaps, factors, model, cfg, det_ref
) -> tuple[float, int, float, np.ndarray]:
    """Spectral radius (nan without a model), relative winding, min singular value of Y."""
    Y = fmaps.Y(factors.theta)
    y_sv = float(np.linalg.svd(Y, compute_uv=False)[:, -1].min())
    det = return_difference_det(fmaps, plant, factors.theta)
    wind = winding_number(det / det_ref) if det_ref is not None else winding_number(det)
    rho = float("nan")
    if model is not None:
        try:
            rho = closed_loop_spectral_radius(model, realize_controller(factors))
        except SingularDY:
            rho = float("inf")
    return rho, wind, y_sv, det


def _is_stable(rho: float, wind: int, y_sv: float, cfg: SynthesisConfig, has_model: bool) -> bool:
    if not y_sv > cfg.y_sv_tol:
        return False
    if has_model:
        return rho < 1.0
    return wind == 0


def iterate_synthesis(
    plant: GeneralizedPlantFrf,
    param: FactorParameterization,
    theta_init=None,
    objective=HINF,
    cfg: SynthesisConfig | None = None,
    model: StateSpaceModel | None = None,
) -> SynthesisReport:
    """Sequential convex synthesis from a stabilizing initial controller.

    ``model`` (the true generalized plant) enables the spectral-radius
    certificate; without it each iterate must keep the winding number of
    ``det(Y - X G22)`` relative to the previous certified iterate at zero.
    """
    cfg = cfg or SynthesisConfig()
    kind = _objective_kind(objective)
    theta_c = zero_controller_theta(param) if theta_init is None else np.asarray(theta_init, float)
    fmaps = realize_factors(param, plant.grid)
    report = SynthesisReport(kind, cfg)

    current = ControllerFactors(param, theta_c)
    rho0, wind0, ysv0, det_c = _certify(plant, fmaps, current, model, cfg, None)
    report.initial_spectral_radius = rho0
    if not _is_stable(rho0, wind0, ysv0, cfg, model is not None):
        raise StabilityLost(
            f"initial controller is not certified stabilizing (rho={rho0}, winding={wind0})",
            0,
            report,
        )
    report.last_stable = current
    settings = cfg.solver_settings()
    gamma_prev = None

    for it in range(1, cfg.max_iter + 1):
        pmaps = build_phi_maps(plant, fmaps, theta_c)
        if kind == REGRET:
            problem = build_regret_lmi(plant, pmaps, objective.oracle)
        else:
            problem = build_norm_lmi(plant, pmaps, kind)
        res = solve_sdp(problem, settings)
        if res.status != OPTIMAL:
            raise SolverFailed(
                f"solver status {res.status} ({res.raw_status})", it, report
            )
        theta = res.x[problem.layout["theta"]]
        gamma = float(res.x[problem.layout["gamma"]][0])
        factors = ControllerFactors(param, theta)
        rho, wind, ysv, det = _certify(plant, fmaps, factors, model, cfg, det_c)
        Phi = pmaps.Phi(theta)
        sym = pmaps.Phi_c @ ctranspose(Phi)
        margin = float(np.linalg.eigvalsh(sym + ctranspose(sym))[:, 0].min())
        report.records.append(
            IterationRecord(
                it, gamma, res.status, res.solve_time, res.iterations,
                res.max_psd_residual, rho, wind, margin, ysv,
            )
        )
        log.info(
            "iter %d: gamma=%.6g rho=%.6f winding=%d margin=%.3e (%.2fs)",
            it, gamma, rho, wind, margin, res.solve_time,
        )
        if not _is_stable(rho, wind, ysv, cfg, model is not None):
            raise StabilityLost(
                f"iterate not certified stabilizing (rho={rho}, winding={wind}, "
                f"min sv(Y)={ysv:.3e})",
                it,
                report,
            )
        theta_c, det_c = theta, det
        report.factors = report.last_stable = factors
        if gamma_prev is not None and abs(gamma - gamma_prev) <= cfg.rel_tol * max(1.0, abs(gamma)):
            report.converged = True
            break
        gamma_prev = gamma
    return report


def synthesize_oracle(
    plant: GeneralizedPlantFrf,
    superset_pattern: SparsityPattern,
    objective: str = HINF,
    target_pattern: SparsityPattern | None = None,
    entry_order: int = 2,
    basis_pole: float = 0.0,
    cfg: SynthesisConfig | None = None,
    model: StateSpaceModel | None = None,
) -> tuple[OracleData, SynthesisReport]:
    """Norm-optimal controller over a superset pattern, sampled on the plant grid."""
    if target_pattern is not None and not superset_pattern.contains(target_pattern):
        raise NotASuperset("oracle pattern does not contain the target pattern")
    if objective not in (H2, HINF):
        raise ValueError("the oracle objective must be 'h2' or 'hinf'")
    param = build_factor_parameterization(superset_pattern, entry_order, basis_pole, plant.grid.Ts)
    report = iterate_synthesis(plant, param, None, objective, cfg, model)
    factors = report.factors
    T_hat = closed_loop_frf(plant, factors.K(plant.grid))
    value = hinf_norm(T_hat) if objective == HINF else h2_norm(T_hat)
    return OracleData(factors, T_hat, objective, value, superset_pattern), report
