import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussmult.exceptions import DegenerateSpectrumError, InvalidCovarianceMatrix
from gaussmult.symplectic import (
    block_trace,
    check_covariance_matrix,
    euler_decompose,
    generator_basis,
    is_orthogonal,
    is_symplectic,
    matrix_exp,
    random_covariance_matrix,
    random_symplectic,
    symplectic_eigenvalue_derivative,
    symplectic_eigenvalues,
    symplectic_form,
    williamson,
)


def test_symplectic_form_single_mode():
    assert np.array_equal(symplectic_form(1), [[0, 1], [-1, 0]])


def test_symplectic_form_two_modes_is_block_diagonal():
    s = symplectic_form(2)
    assert np.array_equal(s[:2, :2], symplectic_form(1))
    assert np.array_equal(s[2:, 2:], symplectic_form(1))
    assert not s[:2, 2:].any()


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_symplectic_form_squares_to_minus_identity(n):
    s = symplectic_form(n)
    assert np.array_equal(s @ s, -np.eye(2 * n))


@pytest.mark.parametrize("n, total, compact", [(1, 3, 1), (2, 10, 4), (3, 21, 9)])
def test_generator_counts(n, total, compact):
    basis = generator_basis(n)
    assert len(basis.generators) == total == 2 * n**2 + n
    assert basis.compact.sum() == compact == n**2


@pytest.mark.parametrize("n", [1, 2, 3])
def test_generators_are_hamiltonian(n):
    omega = symplectic_form(n)
    for k in generator_basis(n).generators:
        m = omega @ k
        assert np.allclose(m, m.T)


def test_single_mode_compact_generator_is_sigma():
    basis = generator_basis(1)
    assert np.array_equal(basis.compact_generators[0], symplectic_form(1))


def test_matrix_exp_zero_and_diagonal():
    assert np.allclose(matrix_exp(np.zeros((4, 4))), np.eye(4))
    t = 0.7
    assert np.allclose(matrix_exp(t * np.diag([1.0, -1.0])), np.diag([np.exp(t), np.exp(-t)]))


def test_matrix_exp_rotation():
    th = 0.3
    r = matrix_exp(th * symplectic_form(1))
    assert np.allclose(r, [[np.cos(th), np.sin(th)], [-np.sin(th), np.cos(th)]])


def test_matrix_exp_rejects_non_square():
    with pytest.raises(ValueError):
        matrix_exp(np.zeros((2, 3)))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_compact_generators_exponentiate_into_passive_group(n):
    rng = np.random.default_rng(n)
    basis = generator_basis(n)
    for _ in range(20):
        o = matrix_exp(basis.combine_compact(rng.uniform(-np.pi, np.pi, n**2)))
        assert is_symplectic(o, 1e-10) and is_orthogonal(o, 1e-10)


def test_symplectic_eigenvalues_examples():
    assert np.allclose(symplectic_eigenvalues(np.eye(6)), 1)
    assert np.allclose(symplectic_eigenvalues(np.diag([2, 2, 3, 3.0])), [3, 2])
    g = np.array([[2, 0.5], [0.5, 1]])
    # single mode: sqrt(det), also the modulus of the eigenvalues of i sigma gamma
    brute = np.abs(np.linalg.eigvals(1j * symplectic_form(1) @ g))
    assert np.allclose(symplectic_eigenvalues(g), np.sqrt(1.75))
    assert np.allclose(brute, np.sqrt(1.75))


def test_symplectic_eigenvalues_invariant_under_congruence():
    rng = np.random.default_rng(1)
    for n in (1, 2, 3):
        g = random_covariance_matrix(n, rng)
        s = random_symplectic(n, rng)
        assert np.allclose(symplectic_eigenvalues(s.T @ g @ s), symplectic_eigenvalues(g), atol=1e-9)


def test_check_covariance_matrix_rejects():
    with pytest.raises(InvalidCovarianceMatrix):
        check_covariance_matrix(np.array([[1, 0.2], [0, 1]]))
    with pytest.raises(InvalidCovarianceMatrix):
        check_covariance_matrix(0.5 * np.eye(2))
    with pytest.raises(InvalidCovarianceMatrix):
        check_covariance_matrix(np.eye(3))
    assert check_covariance_matrix(0.5 * np.eye(2), physical=False).shape == (2, 2)


def test_williamson_identity_convention():
    g = np.diag([5, 5, 2, 2, 1, 1.0])
    s, nu = williamson(g)
    assert np.array_equal(s, np.eye(6))
    assert np.allclose(nu, [5, 2, 1])


def test_williamson_squeezed_vacuum():
    s, nu = williamson(np.diag([4.0, 0.25]))
    assert np.allclose(nu, [1])
    assert np.allclose(s @ np.diag([4.0, 0.25]) @ s.T, np.eye(2), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_williamson_reconstruction(n, seed):
    g = random_covariance_matrix(n, np.random.default_rng(seed))
    s, nu = williamson(g)
    assert is_symplectic(s, 1e-10)
    assert np.all(np.diff(nu) <= 0)
    assert np.max(np.abs(s @ g @ s.T - np.diag(np.repeat(nu, 2)))) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_euler_reconstruction(n, seed):
    s = random_symplectic(n, np.random.default_rng(seed))
    o1, z, o2 = euler_decompose(s)
    assert np.max(np.abs(o1 @ z @ o2 - s)) <= 1e-10
    for o in (o1, o2):
        assert is_symplectic(o, 1e-10) and is_orthogonal(o, 1e-10)
    zd = np.diag(z)
    assert np.all(zd[0::2] >= 1 - 1e-12)
    assert np.allclose(zd[0::2] * zd[1::2], 1)


def test_euler_of_rotation_and_squeezer():
    r = matrix_exp(0.4 * symplectic_form(1))
    _, z, _ = euler_decompose(r)
    assert np.allclose(z, np.eye(2))
    o1, z, o2 = euler_decompose(np.diag([2.0, 0.5]))
    assert np.allclose(z, np.diag([2.0, 0.5]))
    assert np.allclose(np.abs(o1), np.eye(2)) and np.allclose(np.abs(o2), np.eye(2))


def test_block_trace():
    assert block_trace(np.eye(4), 0) == 2
    assert block_trace(np.diag([1, 3, 5, 7.0]), 1) == 12
    p = np.diag([1, 3, 5, 7.0])
    p[0, 2] = p[2, 0] = 9
    assert block_trace(p, 1) == 12
    with pytest.raises(IndexError):
        block_trace(np.eye(4), 2)


def test_eigenvalue_derivative_single_mode_example():
    d = symplectic_eigenvalue_derivative(np.diag([2.0, 2.0]), np.diag([1.0, 3.0]))
    h = 1e-6
    fd = (np.sqrt((2 + h) * (2 + 3 * h)) - np.sqrt((2 - h) * (2 - 3 * h))) / (2 * h)
    assert np.allclose(d, [2.0]) and abs(fd - 2.0) < 1e-8


def test_eigenvalue_derivative_trivial_cases():
    w = np.diag([5, 5, 2, 2.0])
    assert np.array_equal(symplectic_eigenvalue_derivative(w, np.zeros((4, 4))), [0, 0])
    p = np.zeros((4, 4))
    p[0, 2] = p[2, 0] = p[1, 3] = p[3, 1] = 1.0
    assert np.array_equal(symplectic_eigenvalue_derivative(w, p), [0, 0])


def test_eigenvalue_derivative_refuses_degenerate():
    with pytest.raises(DegenerateSpectrumError):
        symplectic_eigenvalue_derivative(np.diag([2, 2, 2, 2.0]), np.eye(4))


def test_eigenvalue_derivative_against_finite_differences():
    rng = np.random.default_rng(3)
    h = 1e-6
    checked = 0
    while checked < 100:
        n = rng.integers(1, 4)
        nus = np.sort(rng.uniform(1.0, 6.0, n))[::-1]
        if n > 1 and np.min(-np.diff(nus)) < 0.1:
            continue
        w = np.diag(np.repeat(nus, 2))
        a = rng.standard_normal((2 * n, 2 * n))
        p = a + a.T
        d = symplectic_eigenvalue_derivative(w, p)
        fd = (symplectic_eigenvalues(w + h * p) - symplectic_eigenvalues(w - h * p)) / (2 * h)
        assert np.linalg.norm(d - fd) <= 1e-6 * max(np.linalg.norm(fd), 1e-3)
        checked += 1
