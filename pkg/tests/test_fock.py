import numpy as np
import pytest

from gaussmult.exceptions import TruncationError
from gaussmult.fock import oracle_entropy, oracle_trace_power, truncated_spectrum


def test_trace_power_examples():
    r = oracle_trace_power([3.0], 2)
    assert abs(r.value - 1 / 3) < 1e-12 and r.truncations[0] <= 60
    assert oracle_trace_power([1.0, 1.0, 1.0], 1.7).value == 1
    assert abs(oracle_trace_power([2.0, 3.0], 2).value - 1 / 6) < 1e-12


def test_entropy_examples():
    assert oracle_entropy([1.0]).value == 0
    assert abs(oracle_entropy([3.0]).value - np.log(4)) < 1e-9
    joint = oracle_entropy([3.0, 2.0]).value
    assert abs(joint - oracle_entropy([3.0]).value - oracle_entropy([2.0]).value) < 1e-9


def test_error_bound_covers_truncation():
    # geometric sums: tr rho^p = (1-q)^p / (1-q^p)
    for nu, p in [(10.0, 1.2), (3.0, 5.0), (1.1, 1.5)]:
        q = (nu - 1) / (nu + 1)
        exact = (1 - q) ** p / (1 - q**p)
        r = oracle_trace_power([nu], p, tail_tol=1e-9)
        assert 0 <= exact - r.value <= r.error_bound * (1 + 1e-6) + 1e-15


def test_monotone_in_nu():
    vals = [oracle_trace_power([nu, 2.0], 1.5).value for nu in (1.0, 1.5, 3.0, 6.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_truncated_spectrum_mass():
    ts = truncated_spectrum([3.0, 2.0], tail_tol=1e-12)
    assert np.all(np.diff(ts.probabilities) <= 0)
    assert abs(ts.probabilities.sum() + ts.tail_bound - 1) < 1e-12


def test_invalid_inputs():
    with pytest.raises(ValueError):
        oracle_trace_power([0.5], 2)
    with pytest.raises(ValueError):
        oracle_trace_power([2.0], 1.0)
    with pytest.raises(TruncationError):
        oracle_trace_power([1e6], 1.0001, tail_tol=1e-13)
