import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spatialregret.errors import RankDeficient
from spatialregret.hermitian import (
    HermitianMatrix,
    hermitian_embed,
    left_inverse,
    max_eigenvalue,
    psd_residual,
    right_inverse,
)

from conftest import random_complex, random_hermitian

H = np.array([[2, 1j], [-1j, 2]])


def test_left_inverse_examples():
    np.testing.assert_allclose(left_inverse(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(left_inverse(np.array([[1.0], [1.0]])), [[0.5, 0.5]])
    np.testing.assert_allclose(left_inverse(np.array([[1.0], [1j]])), [[0.5, -0.5j]])


def test_left_inverse_rank_deficient():
    with pytest.raises(RankDeficient):
        left_inverse(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(RankDeficient):
        left_inverse(np.zeros((3, 1)))
    with pytest.raises(RankDeficient):
        left_inverse(np.ones((1, 2)))


def test_right_inverse_examples():
    np.testing.assert_allclose(right_inverse(np.eye(2)), np.eye(2))
    np.testing.assert_allclose(right_inverse(np.array([[1.0, 1.0]])), [[0.5], [0.5]])
    np.testing.assert_allclose(right_inverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))


def test_embed_examples():
    np.testing.assert_array_equal(hermitian_embed(np.eye(2)), np.eye(4))
    np.testing.assert_array_equal(hermitian_embed(np.zeros((3, 3))), np.zeros((6, 6)))
    E = hermitian_embed(H)
    np.testing.assert_array_equal(E, E.T)
    np.testing.assert_allclose(np.linalg.eigvalsh(E), [1, 1, 3, 3], atol=1e-12)


def test_eigen_examples():
    assert max_eigenvalue(np.diag([1.0, 2.0, -5.0])) == pytest.approx(2)
    assert max_eigenvalue(np.array([[0.0, 1.0], [1.0, 0.0]])) == pytest.approx(1)
    assert max_eigenvalue(H) == pytest.approx(3)
    assert psd_residual(np.eye(2)) == 0
    assert psd_residual(np.diag([1.0, -0.5])) == pytest.approx(0.5)
    assert psd_residual(H) == 0


def test_hermitian_constructor_records_asymmetry():
    m = np.array([[1.0, 2.0], [0.0, 1.0 + 1e-3j]])
    h = HermitianMatrix.from_array(m)
    np.testing.assert_allclose(h.data, h.data.conj().T)
    assert np.all(h.data.diagonal().imag == 0)
    assert h.asymmetry > 1
    assert HermitianMatrix.from_array(H).asymmetry == 0
    with pytest.raises(ValueError):
        HermitianMatrix.from_array(np.array([[np.nan]]))


def test_batched_left_inverse():
    rng = np.random.default_rng(0)
    M = random_complex(rng, 7, 5, 3)
    ML = left_inverse(M)
    np.testing.assert_allclose(ML @ M, np.broadcast_to(np.eye(3), (7, 3, 3)), atol=1e-12)


seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.integers(1, 6), st.integers(0, 4))
def test_left_inverse_properties(seed, n, extra):
    rng = np.random.default_rng(seed)
    M = random_complex(rng, n + extra, n)
    ML = left_inverse(M)
    assert np.linalg.norm(ML @ M - np.eye(n)) <= 1e-9
    P = M @ ML
    assert np.linalg.norm(P - P.conj().T) <= 1e-9


@given(seeds, st.integers(1, 6))
def test_square_inverses_agree(seed, n):
    rng = np.random.default_rng(seed)
    M = random_complex(rng, n, n) + 3 * np.eye(n)
    np.testing.assert_allclose(right_inverse(M), left_inverse(M), atol=1e-10)


@given(seeds, st.integers(1, 8))
def test_embed_duplicates_spectrum(seed, n):
    rng = np.random.default_rng(seed)
    M = random_hermitian(rng, n)
    lam = np.linalg.eigvalsh(M)
    np.testing.assert_allclose(np.linalg.eigvalsh(hermitian_embed(M)), np.repeat(lam, 2), atol=1e-9)


@given(seeds, st.integers(1, 8), st.booleans())
def test_embed_psd_equivalence(seed, n, make_psd):
    rng = np.random.default_rng(seed)
    A = random_complex(rng, n, n)
    M = A @ A.conj().T if make_psd else random_hermitian(rng, n) - 2 * np.eye(n)
    embed_psd = np.linalg.eigvalsh(hermitian_embed(M))[0] >= -1e-10
    assert embed_psd == (psd_residual(M) <= 1e-10)
    if make_psd:
        assert embed_psd
