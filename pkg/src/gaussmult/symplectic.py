"""Symplectic linear algebra on real phase space with (x1, p1, ..., xn, pn) ordering.

Covariance matrices are plain ``numpy`` arrays in vacuum-normalized units
(the vacuum has covariance matrix equal to the identity).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import block_diag, expm, polar

from .exceptions import DegenerateSpectrumError, InvalidCovarianceMatrix, NotSymplectic

#: Absolute tolerance used by every validity check in the package.
ATOL = 1e-9

_J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
_DELTA = np.array([[0.0, 1.0], [1.0, 0.0]])
_BETA = np.array([[1.0, 0.0], [0.0, -1.0]])
_I2 = np.eye(2)


def symplectic_form(n):
    """Return the 2n x 2n symplectic form, a direct sum of [[0, 1], [-1, 0]] blocks.

    Args:
        n (int): number of modes, at least 1

    Returns:
        array: the symplectic form
    """
    if int(n) != n or n < 1:
        raise ValueError(f"number of modes must be a positive integer, got {n!r}")
    return np.kron(np.eye(int(n)), _J2)


def num_modes(matrix):
    """Number of modes of a 2n x 2n phase-space matrix."""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] % 2:
        raise ValueError(f"expected a square matrix of even dimension, got shape {matrix.shape}")
    return matrix.shape[0] // 2


@dataclass(frozen=True)
class GeneratorBasis:
    """Basis of the Lie algebra sp(2n, R).

    ``generators[i]`` is a 2n x 2n matrix K with sigma @ K symmetric.  The
    first ``n**2`` entries are the antisymmetric generators of the passive
    (orthogonal symplectic) subgroup; ``compact`` flags them.

    Ordering, for modes ``j`` and pairs ``i < j`` in lexicographic order:

    1. compact: the rotation of each mode, then for each pair the two passive
       couplings ``[[0, s], [s, 0]]`` and ``[[0, -1], [1, 0]]``;
    2. non-compact: the squeezers ``delta`` and ``beta`` of each mode, then for
       each pair ``[[0, delta], [delta, 0]]`` and ``[[0, beta], [beta, 0]]``.
    """

    n: int
    generators: np.ndarray
    compact: np.ndarray

    def __len__(self):
        return len(self.generators)

    @property
    def compact_generators(self):
        return self.generators[self.compact]

    @property
    def noncompact_generators(self):
        return self.generators[~self.compact]

    def combine(self, coeffs):
        """Return sum_i coeffs[i] K_i."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (len(self),):
            raise ValueError(f"expected {len(self)} coefficients, got shape {coeffs.shape}")
        return np.tensordot(coeffs, self.generators, axes=1)

    def combine_compact(self, coeffs):
        """Return sum_i coeffs[i] L_i over the n**2 compact generators."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n**2,):
            raise ValueError(f"expected {self.n**2} coefficients, got shape {coeffs.shape}")
        return np.tensordot(coeffs, self.compact_generators, axes=1)


def _single(n, j, block):
    k = np.zeros((2 * n, 2 * n))
    k[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = block
    return k


def _pair(n, i, j, upper, lower):
    k = np.zeros((2 * n, 2 * n))
    k[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] = upper
    k[2 * j : 2 * j + 2, 2 * i : 2 * i + 2] = lower
    return k


@lru_cache(maxsize=None)
def generator_basis(n):
    """Return the ``2n**2 + n`` generators of Sp(2n, R), compact ones first.

    Args:
        n (int): number of modes

    Returns:
        GeneratorBasis: read-only basis
    """
    symplectic_form(n)  # validates n
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    compact = [_single(n, j, _J2) for j in range(n)]
    for i, j in pairs:
        compact.append(_pair(n, i, j, _J2, _J2))
        compact.append(_pair(n, i, j, -_I2, _I2))
    noncompact = []
    for j in range(n):
        noncompact.append(_single(n, j, _DELTA))
        noncompact.append(_single(n, j, _BETA))
    for i, j in pairs:
        noncompact.append(_pair(n, i, j, _DELTA, _DELTA))
        noncompact.append(_pair(n, i, j, _BETA, _BETA))
    gens = np.array(compact + noncompact)
    flags = np.zeros(len(gens), dtype=bool)
    flags[: len(compact)] = True
    gens.setflags(write=False)
    flags.setflags(write=False)
    return GeneratorBasis(n=n, generators=gens, compact=flags)


def matrix_exp(a):
    """Matrix exponential of a real square matrix (scaling and squaring)."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix_exp needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix_exp needs finite entries")
    return expm(a)


def is_symplectic(s, tol=ATOL):
    """True if S^T sigma S = sigma within ``tol`` relative to ||S||^2."""
    s = np.asarray(s, dtype=float)
    omega = symplectic_form(num_modes(s))
    scale = max(1.0, np.max(np.abs(s)) ** 2)
    return np.max(np.abs(s.T @ omega @ s - omega)) <= tol * scale


def is_orthogonal(o, tol=ATOL):
    o = np.asarray(o, dtype=float)
    return np.max(np.abs(o.T @ o - np.eye(len(o)))) <= tol


def check_covariance_matrix(gamma, *, physical=True, tol=ATOL):
    """Validate a covariance matrix and return it as a float array.

    Args:
        gamma (array): candidate covariance matrix
        physical (bool): also require gamma + i sigma >= 0
        tol (float): absolute tolerance

    Raises:
        InvalidCovarianceMatrix: on asymmetry, indefiniteness or an uncertainty violation
    """
    gamma = np.asarray(gamma, dtype=float)
    try:
        n = num_modes(gamma)
    except ValueError as exc:
        raise InvalidCovarianceMatrix(str(exc)) from None
    if not np.all(np.isfinite(gamma)):
        raise InvalidCovarianceMatrix("covariance matrix has non-finite entries")
    scale = max(1.0, np.max(np.abs(gamma)))
    if np.max(np.abs(gamma - gamma.T)) > tol * scale:
        raise InvalidCovarianceMatrix("covariance matrix is not symmetric")
    if np.linalg.eigvalsh(gamma)[0] <= 0:
        raise InvalidCovarianceMatrix("covariance matrix is not positive definite")
    if physical:
        omega = symplectic_form(n)
        low = np.linalg.eigvalsh(gamma + 1j * omega)[0]
        if low < -tol * scale:
            raise InvalidCovarianceMatrix(
                f"uncertainty relation violated: min eig(gamma + i sigma) = {low:.3e}"
            )
    return gamma


def symplectic_eigenvalues(gamma):
    """Decreasingly ordered symplectic eigenvalues of a positive definite matrix.

    The eigenvalues of sigma gamma sigma^T gamma come in equal pairs nu_i**2;
    they are square-rooted and each pair is averaged.
    """
    gamma = check_covariance_matrix(gamma, physical=False)
    n = num_modes(gamma)
    omega = symplectic_form(n)
    raw = np.linalg.eigvals(omega @ gamma @ omega.T @ gamma).real
    raw = np.sort(np.clip(raw, 0.0, None))[::-1]
    return np.sqrt(raw).reshape(n, 2).mean(axis=1)


def _is_williamson_form(gamma, tol):
    d = np.diag(gamma)
    if np.max(np.abs(gamma - np.diag(d))) > tol:
        return False
    nus = d[0::2]
    return np.all(np.abs(d[0::2] - d[1::2]) <= tol) and np.all(np.diff(nus) <= tol)


def williamson(gamma):
    """Williamson normal form of a positive definite matrix.

    Returns ``(S, nu)`` with S symplectic and ``S @ gamma @ S.T`` equal to the
    direct sum of ``nu[i] * eye(2)``, nu decreasing.  A matrix already in that
    form yields ``S = eye``.

    The orthonormal frame comes from the Hermitian matrix
    i gamma^{-1/2} sigma gamma^{-1/2}, whose positive eigenvalues are 1/nu.
    """
    gamma = check_covariance_matrix(gamma, physical=False)
    n = num_modes(gamma)
    scale = np.max(np.abs(gamma))
    if _is_williamson_form(gamma, 1e-13 * scale):
        return np.eye(2 * n), np.diag(gamma)[0::2].copy()
    s, _ = _williamson_frame(gamma, n)
    # one refinement pass on the nearly diagonal, well-conditioned residual
    r = s @ gamma @ s.T
    s2, nu = _williamson_frame((r + r.T) / 2, n)
    return s2 @ s, nu


def _williamson_frame(gamma, n):
    w, u = np.linalg.eigh(gamma)
    inv_sqrt = (u / np.sqrt(w)) @ u.T
    a = inv_sqrt @ symplectic_form(n) @ inv_sqrt
    lam, vecs = np.linalg.eigh(1j * a)
    lam, vecs = lam[n:], vecs[:, n:]

    q = np.empty((2 * n, 2 * n))
    for j in range(n):
        v = vecs[:, j]
        k = np.argmax(np.abs(v))
        v = 1j * v * np.conj(v[k]) / np.abs(v[k])
        q[:, 2 * j] = np.sqrt(2) * v.imag
        q[:, 2 * j + 1] = np.sqrt(2) * v.real
    nu = 1.0 / lam
    s = np.repeat(np.sqrt(nu), 2)[:, None] * (q.T @ inv_sqrt)
    return s, nu


def _project_passive(o):
    """Nearest orthogonal matrix commuting with sigma (an orthogonal symplectic matrix)."""
    omega = symplectic_form(num_modes(o))
    return polar((o - omega @ o @ omega) / 2)[0]


def euler_decompose(s):
    """Euler (Bloch-Messiah) decomposition ``S = O1 @ Z @ O2``.

    O1, O2 are orthogonal symplectic and ``Z = diag(z1, 1/z1, ..., zn, 1/zn)``
    with z decreasing and ``z >= 1``.

    Args:
        s (array): symplectic matrix

    Returns:
        tuple[array, array, array]: ``(O1, Z, O2)``
    """
    s = np.asarray(s, dtype=float)
    n = num_modes(s)
    if not is_symplectic(s):
        raise NotSymplectic("euler_decompose needs a symplectic matrix")
    omega = symplectic_form(n)
    m = s @ s.T
    _, vecs = np.linalg.eigh(m)
    top = vecs[:, ::-1][:, :n]

    # symplectic Gram-Schmidt keeps (v_j, sigma^T v_j) an orthonormal Darboux frame
    # even inside near-degenerate clusters of eigenvalue 1
    o1 = np.empty((2 * n, 2 * n))
    z = np.empty(n)
    for j in range(n):
        v = top[:, j].copy()
        for _ in range(2):
            prev = o1[:, : 2 * j]
            v -= prev @ (prev.T @ v)
        v /= np.linalg.norm(v)
        v *= np.sign(v[np.argmax(np.abs(v))])
        o1[:, 2 * j] = v
        o1[:, 2 * j + 1] = omega.T @ v
        z[j] = np.sqrt(max(v @ m @ v, 1.0))
    zdiag = np.ravel(np.column_stack([z, 1.0 / z]))
    o2 = _project_passive((o1.T @ s) / zdiag[:, None])
    return o1, np.diag(zdiag), o2


def block_trace(p, j):
    """Trace of the 2 x 2 diagonal block of ``p`` belonging to mode ``j`` (0-based)."""
    p = np.asarray(p, dtype=float)
    n = num_modes(p)
    if not 0 <= j < n:
        raise IndexError(f"mode index {j} out of range for {n} modes")
    return p[2 * j, 2 * j] + p[2 * j + 1, 2 * j + 1]


def symplectic_eigenvalue_derivative(gamma_w, p, tol=ATOL):
    """First-order change of the symplectic eigenvalues of ``gamma_w + k * p`` at k = 0.

    ``gamma_w`` must be in Williamson form with pairwise distinct eigenvalues.
    Each derivative is half the trace of the corresponding diagonal block of p.

    Raises:
        DegenerateSpectrumError: two symplectic eigenvalues closer than ``tol``
    """
    gamma_w = np.asarray(gamma_w, dtype=float)
    p = np.asarray(p, dtype=float)
    n = num_modes(gamma_w)
    if p.shape != gamma_w.shape:
        raise ValueError(f"perturbation shape {p.shape} does not match {gamma_w.shape}")
    if not _is_williamson_form(gamma_w, tol):
        raise ValueError("gamma_w is not in Williamson normal form")
    nus = np.diag(gamma_w)[0::2]
    if n > 1 and np.min(np.abs(np.subtract.outer(nus, nus))[np.triu_indices(n, 1)]) < tol:
        raise DegenerateSpectrumError(f"degenerate symplectic spectrum {nus}")
    return np.array([0.5 * block_trace(p, j) for j in range(n)])


def direct_sum(*blocks):
    return block_diag(*blocks)


def random_symplectic(n, rng, scale=0.5):
    """Random element exp(sum k_i K_i) of Sp(2n, R) with k_i ~ N(0, scale**2)."""
    basis = generator_basis(n)
    return matrix_exp(basis.combine(scale * rng.standard_normal(len(basis))))


def random_covariance_matrix(n, rng, scale=0.5, max_nu=5.0):
    """Random mixed covariance matrix S^T diag(nu) S with nu in [1, max_nu]."""
    nus = rng.uniform(1.0, max_nu, size=n)
    s = random_symplectic(n, rng, scale)
    return s.T @ np.diag(np.repeat(nus, 2)) @ s
