"""Gaussian states at the covariance-matrix level: parametrizations, p-purities,
entropies, thermal spectra and majorization."""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidCovarianceMatrix, TruncationError
from .symplectic import (
    ATOL,
    check_covariance_matrix,
    generator_basis,
    matrix_exp,
    num_modes,
    symplectic_eigenvalues,
    symplectic_form,
    williamson,
)


@dataclass(frozen=True)
class PureStateParams:
    """Coordinates (l, z) of a pure covariance matrix.

    ``l`` holds the n**2 coefficients of the passive generators and ``z`` the
    n single-mode squeezing factors.
    """

    n: int
    l: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        l = np.array(self.l, dtype=float).reshape(-1)
        z = np.array(self.z, dtype=float).reshape(-1)
        if l.shape != (self.n**2,) or z.shape != (self.n,):
            raise ValueError(
                f"{self.n}-mode parameters need {self.n**2} passive and {self.n} squeezing values"
            )
        if not np.all(np.isfinite(l)):
            raise ValueError("passive coefficients must be finite")
        if not np.all(z > 0) or not np.all(np.isfinite(z)):
            raise ValueError(f"squeezing factors must be finite and strictly positive, got {z}")
        l.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "z", z)

    @classmethod
    def vacuum(cls, n):
        return cls(n, np.zeros(n**2), np.ones(n))

    @classmethod
    def from_vector(cls, n, x):
        """Inverse of :meth:`to_vector`: ``x = (l, log z)``."""
        x = np.asarray(x, dtype=float)
        return cls(n, x[: n**2], np.exp(x[n**2 :]))

    def to_vector(self):
        return np.concatenate([self.l, np.log(self.z)])


def squeezing_diag(z):
    """diag(z1, 1/z1, ..., zn, 1/zn)."""
    z = np.asarray(z, dtype=float)
    return np.diag(np.ravel(np.column_stack([z, 1.0 / z])))


def pure_cm_from_params(params):
    """Pure covariance matrix exp(-sum l_i L_i^T) D(z) exp(-sum l_i L_i)."""
    e = matrix_exp(-generator_basis(params.n).combine_compact(params.l))
    gamma = e.T @ squeezing_diag(params.z) @ e
    return (gamma + gamma.T) / 2


def random_pure_params(n, rng, log_z_scale=1.0):
    """Random pure-state coordinates: l uniform in [-pi, pi), log z uniform in +-log_z_scale."""
    return PureStateParams(
        n,
        rng.uniform(-np.pi, np.pi, size=n**2),
        np.exp(rng.uniform(-log_z_scale, log_z_scale, size=n)),
    )


def perturbed_cm(gamma, k):
    """Congruence exp(sum k_i K_i^T) gamma exp(sum k_i K_i) over the full generator basis."""
    gamma = check_covariance_matrix(gamma)
    basis = generator_basis(num_modes(gamma))
    e = matrix_exp(basis.combine(k))
    out = e.T @ gamma @ e
    return (out + out.T) / 2


def _clamp(nus, tol=ATOL):
    nus = np.asarray(nus, dtype=float)
    if np.any(nus < 1 - tol):
        raise InvalidCovarianceMatrix(f"symplectic eigenvalues below 1: {nus}")
    return np.where(nus - 1 <= tol, 1.0, nus)


def _check_p(p):
    if not p > 1 or not np.isfinite(p):
        raise ValueError(f"Renyi order must lie in (1, inf), got {p}")


def log_f_p(x, p):
    """log((x + 1)**p - (x - 1)**p), stable for x near 1 and p near 1."""
    _check_p(p)
    x = np.asarray(x, dtype=float)
    if np.any(x < 1):
        raise ValueError(f"f_p needs x >= 1, got {x}")
    with np.errstate(divide="ignore"):
        log_q = np.log((x - 1) / (x + 1))
    return p * np.log1p(x) + np.log(-np.expm1(p * log_q))


def f_p(x, p):
    """(x + 1)**p - (x - 1)**p for x >= 1, p > 1."""
    return np.exp(log_f_p(x, p))


def f_p_log_derivative(x, p):
    """f_p'(x) / f_p(x)."""
    x = np.asarray(x, dtype=float)
    q = (x - 1) / (x + 1)
    return p * (1 - q ** (p - 1)) / ((x + 1) * (1 - q**p))


def log_F_p_of_spectrum(nus, p):
    """sum_i log f_p(nu_i)."""
    return float(np.sum(log_f_p(_clamp(nus), p)))


def F_p(gamma, p):
    """Product of f_p over the symplectic eigenvalues of gamma."""
    return float(np.exp(log_F_p_of_spectrum(symplectic_eigenvalues(gamma), p)))


@dataclass(frozen=True)
class PurityValue:
    p: float
    trace_power: float
    p_norm: float
    renyi: float


def purity_from_spectrum(nus, p):
    """tr rho**p, its p-norm and Renyi entropy from symplectic eigenvalues."""
    _check_p(p)
    nus = _clamp(nus)
    log_tr = len(nus) * p * np.log(2.0) - log_F_p_of_spectrum(nus, p)
    log_tr = min(log_tr, 0.0)
    return PurityValue(
        p=float(p),
        trace_power=float(np.exp(log_tr)),
        p_norm=float(np.exp(log_tr / p)),
        renyi=float(log_tr / (1 - p)) + 0.0,
    )


def trace_power(gamma, p):
    """tr rho**p = 2**(p n) / prod_i f_p(nu_i) of the Gaussian state with CM gamma."""
    gamma = check_covariance_matrix(gamma)
    return purity_from_spectrum(symplectic_eigenvalues(gamma), p)


def _entropy_term(nus):
    plus = (nus + 1) / 2
    minus = (nus - 1) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(minus > 0, minus * np.log(np.where(minus > 0, minus, 1.0)), 0.0)
    return plus * np.log(plus) - tail


def entropy_from_spectrum(nus):
    return float(np.sum(_entropy_term(_clamp(nus))))


def von_neumann_entropy(gamma):
    """Von Neumann entropy (nats) of the Gaussian state with CM gamma."""
    gamma = check_covariance_matrix(gamma)
    return entropy_from_spectrum(symplectic_eigenvalues(gamma))


@dataclass(frozen=True)
class ThermalSpectrum:
    """Number-basis spectrum lambda_0..lambda_K of a single-mode thermal state."""

    nu: float
    probabilities: np.ndarray
    tail_mass: float

    @property
    def truncation(self):
        return len(self.probabilities) - 1

    @property
    def ratio(self):
        return (self.nu - 1) / (self.nu + 1)


def thermal_spectrum(nu, truncation):
    """lambda_k = 2/(nu+1) * ((nu-1)/(nu+1))**k for k <= truncation, with the exact tail mass."""
    if nu < 1 - ATOL:
        raise ValueError(f"symplectic eigenvalue must be >= 1, got {nu}")
    if truncation < 0:
        raise ValueError("truncation must be non-negative")
    nu = max(float(nu), 1.0)
    q = (nu - 1) / (nu + 1)
    k = np.arange(truncation + 1)
    probs = (1 - q) * q**k
    probs.setflags(write=False)
    return ThermalSpectrum(nu=nu, probabilities=probs, tail_mass=q ** (truncation + 1))


def _product_spectrum(nus, truncation):
    probs = np.ones(1)
    kept = 1.0
    for nu in nus:
        ts = thermal_spectrum(nu, truncation)
        probs = np.multiply.outer(probs, ts.probabilities).ravel()
        kept *= 1 - ts.tail_mass
    return np.sort(probs)[::-1], 1 - kept


def _auto_truncation(nus, eps):
    q = max((nu - 1) / (nu + 1) for nu in nus)
    if q == 0:
        return 0
    # per-mode tail q**(K+1) < eps / (2n) keeps the joint tail below eps
    return max(0, int(np.ceil(np.log(eps / (2 * len(nus))) / np.log(q))))


@dataclass(frozen=True)
class MajorizationResult:
    """Outcome of a truncated majorization test.

    ``verdict`` is ``"holds"``, ``"fails"`` or ``"inconclusive"`` and
    ``margin`` is the smallest partial-sum difference on the truncated spectra.
    """

    verdict: str
    margin: float
    tail_a: float
    tail_b: float
    truncation: int

    def __bool__(self):
        return self.verdict == "holds"


_MAX_BOX = 20_000_000


def majorizes(a, b, truncation=None, eps=1e-10):
    """Does the thermal state with symplectic spectrum ``a`` majorize the one with ``b``?

    Both number-basis spectra are truncated to a common box of size
    ``(truncation + 1)**n`` (chosen automatically when ``None``) with joint
    tail mass below ``eps``.

    Raises:
        TruncationError: the given truncation leaves tail mass >= eps, or the box is too large
    """
    a = _clamp(a)
    b = _clamp(b)
    if len(a) != len(b):
        raise ValueError("spectra must have the same number of modes")
    if truncation is None:
        truncation = _auto_truncation(np.concatenate([a, b]), eps)
    if (truncation + 1) ** len(a) > _MAX_BOX:
        raise TruncationError(f"truncation box {(truncation + 1)}^{len(a)} is too large")
    lam_a, tail_a = _product_spectrum(a, truncation)
    lam_b, tail_b = _product_spectrum(b, truncation)
    if max(tail_a, tail_b) >= eps:
        raise TruncationError(
            f"truncation {truncation} leaves tail mass {max(tail_a, tail_b):.3e} >= {eps:.1e}"
        )
    diff = np.cumsum(lam_a) - np.cumsum(lam_b)
    margin = float(np.min(diff))
    if margin - tail_b >= -eps:
        verdict = "holds"
    elif margin + tail_a < -eps:
        verdict = "fails"
    else:
        verdict = "inconclusive"
    return MajorizationResult(verdict, margin, tail_a, tail_b, truncation)


def pure_state_decomposition(gamma):
    """Split gamma = gamma_p + V with gamma_p pure and V positive semidefinite.

    With ``S gamma S^T = diag(nu)`` and ``W = S^{-1}``, ``gamma_p = W W^T`` and
    ``V = W diag(nu - 1) W^T``, so the state is a Gaussian mixture of
    displaced copies of the pure state gamma_p.
    """
    gamma = check_covariance_matrix(gamma)
    s, nu = williamson(gamma)
    omega = symplectic_form(num_modes(gamma))
    w = -omega @ s.T @ omega
    gamma_p = w @ w.T
    v = w @ np.diag(np.repeat(_clamp(nu) - 1, 2)) @ w.T
    return (gamma_p + gamma_p.T) / 2, (v + v.T) / 2
