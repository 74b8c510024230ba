"""Truncated number-basis sums over thermal spectra.

These routines recompute trace powers and entropies by summing the
geometric occupation probabilities of each normal mode directly.  They
deliberately avoid the closed forms in :mod:`gaussmult.states`, so the two
can be checked against each other.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import TruncationError

MAX_TRUNCATION = 10_000
_MAX_BOX = 20_000_000


@dataclass(frozen=True)
class TruncatedSpectrum:
    """Joint occupation probabilities of independent thermal modes over a box."""

    nus: tuple
    probabilities: np.ndarray
    tail_bound: float


@dataclass(frozen=True)
class OracleValue:
    value: float
    error_bound: float
    truncations: tuple


def _ratio(nu):
    if nu < 1:
        raise ValueError(f"symplectic eigenvalue must be >= 1, got {nu}")
    return (nu - 1.0) / (nu + 1.0)


def _mode_probabilities(nu, cutoff):
    q = _ratio(nu)
    return (1 - q) * q ** np.arange(cutoff + 1)


def _cutoff(tail_of, tol):
    """Smallest K with tail_of(K) < tol."""
    k = 0
    while tail_of(k) >= tol:
        k += 1
        if k > MAX_TRUNCATION:
            raise TruncationError(f"tail tolerance {tol:.1e} not reached below K = {MAX_TRUNCATION}")
    return k


def _power_tail(nu, p):
    # sum_{k > K} ((1-q) q^k)^p, a geometric series in q^p
    q = _ratio(nu)
    qp = q**p
    return lambda k: (1 - q) ** p * qp ** (k + 1) / (1 - qp) if q > 0 else 0.0


def _box_sum(factors, func):
    """Sum func(joint probability) over the outer product of per-mode probability vectors."""
    size = int(np.prod([len(f) for f in factors]))
    if size > _MAX_BOX:
        raise TruncationError(f"truncation box of {size} states is too large")
    joint = np.ones(1)
    for f in factors:
        joint = np.multiply.outer(joint, f).ravel()
    return float(np.sum(func(joint))), joint


def truncated_spectrum(nus, tail_tol=1e-12):
    """Decreasingly sorted joint spectrum with omitted mass below ``tail_tol``."""
    nus = tuple(float(nu) for nu in nus)
    n = len(nus)
    factors = []
    for nu in nus:
        q = _ratio(nu)
        k = _cutoff(lambda k, q=q: q ** (k + 1), tail_tol / n)
        factors.append(_mode_probabilities(nu, k))
    total, joint = _box_sum(factors, lambda x: x)
    return TruncatedSpectrum(nus, np.sort(joint)[::-1], max(0.0, 1.0 - total))


def oracle_trace_power(nus, p, tail_tol=1e-13):
    """tr rho**p by direct summation of (prod_i lambda_{k_i})**p over a truncation box.

    The truncation of each mode is chosen so that its omitted p-power mass is
    below ``tail_tol / n``; since every full per-mode sum is at most one, the
    omitted joint mass is bounded by the sum of the per-mode tails.

    Returns:
        OracleValue: value and an upper bound on the omitted mass
    """
    if tail_tol <= 0:
        raise ValueError("tail_tol must be positive")
    if not p > 1:
        raise ValueError(f"Renyi order must lie in (1, inf), got {p}")
    n = len(nus)
    factors, cutoffs, bound = [], [], 0.0
    for nu in nus:
        tail = _power_tail(nu, p)
        k = _cutoff(tail, tail_tol / n)
        factors.append(_mode_probabilities(nu, k))
        cutoffs.append(k)
        bound += tail(k)
    value, _ = _box_sum(factors, lambda x: x**p)
    return OracleValue(value, bound, tuple(cutoffs))


def _entropy_tails(nu):
    # mass and -sum lambda ln lambda beyond K, both in closed form for the geometric law
    q = _ratio(nu)
    if q == 0:
        return (lambda k: 0.0), (lambda k: 0.0)
    lq, l1q = np.log(q), np.log1p(-q)

    def mass(k):
        return q ** (k + 1)

    def ent(k):
        # sum_{m>k} m q^m = q^{k+1} ((k+1)(1-q) + q) / (1-q)^2
        sum_mq = q ** (k + 1) * ((k + 1) * (1 - q) + q) / (1 - q) ** 2
        return -l1q * mass(k) - lq * (1 - q) * sum_mq

    return mass, ent


def oracle_entropy(nus, tail_tol=1e-12):
    """Von Neumann entropy -sum lambda ln lambda over a truncation box (nats).

    The omitted part is bounded by sum_i [H_i^tail + mass_i^tail * sum_{j != i} H_j],
    using that ln of a product splits into per-mode terms.
    """
    if tail_tol <= 0:
        raise ValueError("tail_tol must be positive")
    n = len(nus)
    factors, cutoffs, tails = [], [], []
    for nu in nus:
        mass, ent = _entropy_tails(nu)
        k = _cutoff(lambda k: max(ent(k), mass(k)), tail_tol / (n * (1 + 10 * n)))
        factors.append(_mode_probabilities(nu, k))
        cutoffs.append(k)
        tails.append((mass(k), ent(k)))

    def h(x):
        x = x[x > 0]
        return -x * np.log(x)

    value, _ = _box_sum(factors, h)
    per_mode = [float(np.sum(h(f))) + t[1] for f, t in zip(factors, tails)]
    total = sum(per_mode)
    bound = sum(t[1] + t[0] * (total - hm) for t, hm in zip(tails, per_mode))
    return OracleValue(value, bound, tuple(cutoffs))
