"""Affine Hermitian LMIs and their solution with Clarabel.

Every complex block ``M(v) = M0 + sum_k v[idx_k] M_k ⪰ 0`` is mapped to the
real PSD cone through :func:`hermitian_embed` and vectorized in Clarabel's
``svec`` convention (upper triangle, column-major, off-diagonals times sqrt 2).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import clarabel
import numpy as np
from scipy import sparse

from .hermitian import hermitian_embed, psd_residual

PSD_RESIDUAL_MAX = 1e-7

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class LmiBlock:
    """``const + sum_k v[var_index[k]] * coeffs[k] ⪰ 0`` (complex Hermitian)."""

    omega: float
    const: np.ndarray  # (d, d)
    var_index: np.ndarray  # (L,)
    coeffs: np.ndarray  # (L, d, d)

    def __post_init__(self):
        self.const = np.asarray(self.const, dtype=complex)
        self.var_index = np.asarray(self.var_index, dtype=int).reshape(-1)
        self.coeffs = np.asarray(self.coeffs, dtype=complex).reshape(
            (self.var_index.size,) + self.const.shape
        )

    @property
    def dim(self) -> int:
        return self.const.shape[0]

    def evaluate(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.const + np.tensordot(v[self.var_index], self.coeffs, axes=1)


@dataclass
class SdpProblem:
    """``min c @ v`` subject to the LMI blocks and ``A_eq v = b_eq``.

    ``layout`` maps variable group names to slices of ``v``.
    """

    c: np.ndarray
    blocks: list[LmiBlock]
    layout: dict = field(default_factory=dict)
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    reg_index: np.ndarray | None = None  # variables subject to the optional ridge term

    @property
    def n_vars(self) -> int:
        return self.c.size


@dataclass
class SolverSettings:
    tol_feas: float = 1e-7
    tol_gap: float = 1e-7
    max_iter: int = 200
    regularization: float = 0.0  # weight of ||theta||^2; off by default
    verbose: bool = False


@dataclass
class SdpResult:
    x: np.ndarray
    status: str
    objective: float
    iterations: int
    solve_time: float
    max_psd_residual: float
    raw_status: str

    def group(self, layout: dict, name: str) -> np.ndarray:
        return self.x[layout[name]]


def _svec_indices(n: int):
    rows, cols = np.tril_indices(n)
    # tril row-major == triu column-major with (i, j) = (cols, rows)
    i, j = cols, rows
    scale = np.where(i == j, 1.0, np.sqrt(2.0))
    return i, j, scale


def svec(S: np.ndarray) -> np.ndarray:
    """Clarabel's PSD-triangle vectorization (batched over leading axes)."""
    i, j, scale = _svec_indices(S.shape[-1])
    return S[..., i, j] * scale


def _map_status(raw: str) -> str:
    if raw in ("Solved", "AlmostSolved"):
        return OPTIMAL
    if raw in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return INFEASIBLE
    if raw in ("DualInfeasible", "AlmostDualInfeasible"):
        return UNBOUNDED
    return NUMERICAL_FAILURE


def solve_sdp(problem: SdpProblem, settings: SolverSettings | None = None) -> SdpResult:
    settings = settings or SolverSettings()
    n = problem.n_vars
    A_parts, b_parts, cones = [], [], []

    if problem.A_eq is not None and len(problem.b_eq):
        A_parts.append(sparse.csc_matrix(np.asarray(problem.A_eq, dtype=float)))
        b_parts.append(np.asarray(problem.b_eq, dtype=float))
        cones.append(clarabel.ZeroConeT(len(problem.b_eq)))

    for blk in problem.blocks:
        d2 = 2 * blk.dim
        b_parts.append(svec(hermitian_embed(blk.const)))
        cols = svec(hermitian_embed(blk.coeffs))  # (L, d2(d2+1)/2)
        coo = sparse.coo_matrix(-cols.T)
        A_parts.append(
            sparse.csc_matrix(
                (coo.data, (coo.row, blk.var_index[coo.col])), shape=(cols.shape[1], n)
            )
        )
        cones.append(clarabel.PSDTriangleConeT(d2))

    A = sparse.vstack(A_parts).tocsc() if A_parts else sparse.csc_matrix((0, n))
    b = np.concatenate(b_parts) if b_parts else np.zeros(0)
    if settings.regularization > 0 and problem.reg_index is not None:
        diag = np.zeros(n)
        diag[problem.reg_index] = 2.0 * settings.regularization
        P = sparse.diags(diag).tocsc()
    else:
        P = sparse.csc_matrix((n, n))

    opts = clarabel.DefaultSettings()
    opts.verbose = settings.verbose
    opts.tol_feas = settings.tol_feas
    opts.tol_gap_abs = settings.tol_gap
    opts.tol_gap_rel = settings.tol_gap
    opts.max_iter = settings.max_iter

    t0 = time.perf_counter()
    solver = clarabel.DefaultSolver(P, np.asarray(problem.c, dtype=float), A, b, cones, opts)
    sol = solver.solve()
    elapsed = time.perf_counter() - t0

    raw = str(sol.status)
    status = _map_status(raw)
    x = np.asarray(sol.x, dtype=float)
    if status == OPTIMAL:
        resid = max(
            (float(psd_residual(blk.evaluate(x))) for blk in problem.blocks), default=0.0
        )
    else:
        resid = np.inf
    return SdpResult(
        x=x,
        status=status,
        objective=float(np.asarray(problem.c) @ x) if x.size else np.nan,
        iterations=int(sol.iterations),
        solve_time=elapsed,
        max_psd_residual=resid,
        raw_status=raw,
    )


def dump_problem(problem: SdpProblem, path) -> None:
    """Write the problem as an ``.npz`` archive for external cross-checks.

    Arrays: ``c``, ``A_eq``, ``b_eq`` and, per block ``k``, ``omega_k``,
    ``const_k``, ``var_index_k``, ``coeffs_k``.
    """
    arrays = {"c": problem.c, "n_blocks": np.array(len(problem.blocks))}
    if problem.A_eq is not None:
        arrays["A_eq"] = problem.A_eq
        arrays["b_eq"] = problem.b_eq
    for k, blk in enumerate(problem.blocks):
        arrays[f"omega_{k}"] = np.array(blk.omega)
        arrays[f"const_{k}"] = blk.const
        arrays[f"var_index_{k}"] = blk.var_index
        arrays[f"coeffs_{k}"] = blk.coeffs
    np.savez_compressed(path, **arrays)
