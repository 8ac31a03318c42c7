"""Complex dense linear algebra: one-sided inverses, Hermitian spectra and
the real symmetric embedding used to pose complex LMIs in a real PSD cone.

All functions accept stacked inputs with arbitrary leading (batch) axes
wherever that is natural, so a whole frequency grid can be processed at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficient

#: relative singular-value gap below which a matrix is treated as rank deficient
RANK_TOL = 1e-8


@dataclass(frozen=True)
class HermitianMatrix:
    """A Hermitian matrix built by symmetrizing ``(M + M*)/2``.

    The Frobenius norm of the discarded skew part is kept in ``asymmetry`` so
    that callers can check that their input was Hermitian to begin with.
    """

    data: np.ndarray
    asymmetry: float = field(default=0.0)

    @classmethod
    def from_array(cls, m) -> "HermitianMatrix":
        m = np.asarray(m, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix entries must be finite")
        h = 0.5 * (m + m.conj().T)
        h[np.diag_indices_from(h)] = h.diagonal().real
        return cls(h, float(np.linalg.norm(m - h)))

    @property
    def dim(self) -> int:
        return self.data.shape[0]


def _as_hermitian_array(m) -> np.ndarray:
    if isinstance(m, HermitianMatrix):
        return m.data
    m = np.asarray(m)
    return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))


def _check_rank(s: np.ndarray, rank_tol: float) -> None:
    smax = s[..., 0]
    smin = s[..., -1]
    bad = smin <= rank_tol * smax
    if np.any(bad):
        idx = np.unravel_index(np.argmax(bad), bad.shape) if bad.ndim else ()
        raise RankDeficient(float(smin[idx]), float(smax[idx]))


def left_inverse(m, rank_tol: float = RANK_TOL) -> np.ndarray:
    """``M^L = (M* M)^{-1} M*`` for full-column-rank ``M`` (batched)."""
    m = np.asarray(m, dtype=complex)
    if m.shape[-2] < m.shape[-1]:
        raise RankDeficient(0.0, float(np.linalg.norm(m)))
    _check_rank(np.linalg.svd(m, compute_uv=False), rank_tol)
    mh = np.conj(np.swapaxes(m, -1, -2))
    return np.linalg.solve(mh @ m, mh)


def right_inverse(m, rank_tol: float = RANK_TOL) -> np.ndarray:
    """``M^R = M* (M M*)^{-1}`` for full-row-rank ``M`` (batched)."""
    m = np.asarray(m, dtype=complex)
    mh = np.conj(np.swapaxes(m, -1, -2))
    return np.conj(np.swapaxes(left_inverse(mh, rank_tol), -1, -2))


def hermitian_embed(m) -> np.ndarray:
    """Real symmetric embedding ``[[Re M, -Im M], [Im M, Re M]]``.

    The embedding is PSD iff ``M`` is, and its spectrum is that of ``M`` with
    every eigenvalue repeated twice.
    """
    h = _as_hermitian_array(m)
    re, im = h.real, h.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def eigvalsh(m) -> np.ndarray:
    return np.linalg.eigvalsh(_as_hermitian_array(m))


def max_eigenvalue(m):
    """Largest eigenvalue of a Hermitian matrix (or a stack of them)."""
    return eigvalsh(m)[..., -1]


def min_eigenvalue(m):
    return eigvalsh(m)[..., 0]


def psd_residual(m):
    """``max(0, -lambda_min(M))``; zero exactly when ``M`` is PSD."""
    return np.maximum(0.0, -min_eigenvalue(m))


def sigma_max(m):
    """Largest singular value, batched over leading axes."""
    return np.linalg.svd(np.asarray(m), compute_uv=False)[..., 0]


def ctranspose(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))
