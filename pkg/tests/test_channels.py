import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussmult.channels import (
    GaussianChannel,
    apply,
    atten_amp,
    channel_from_dict,
    channel_to_dict,
    classical_noise,
    identity_channel,
    is_pure_channel,
    load_channel,
    reduce_standard_form,
    tensor,
    thermal_bath,
    validate,
)
from gaussmult.exceptions import HypothesisError, InvalidChannel
from gaussmult.states import pure_cm_from_params, random_pure_params
from gaussmult.symplectic import (
    is_symplectic,
    random_covariance_matrix,
    symplectic_eigenvalues,
    symplectic_form,
)

I2 = np.eye(2)


def random_single_mode(rng, valid=True):
    while True:
        x = rng.normal(size=(2, 2))
        a = rng.normal(size=(2, 2))
        y = a @ a.T + abs(np.linalg.det(x) - 1) * I2 * rng.uniform(0.5, 1.5)
        ch = GaussianChannel(x, y)
        if validate(ch).valid == valid:
            return ch


def test_apply_examples():
    rng = np.random.default_rng(0)
    g = random_covariance_matrix(2, rng)
    assert np.allclose(apply(identity_channel(2), g), g)
    assert np.allclose(apply(atten_amp(0.5), I2), I2)
    out = apply(classical_noise(I2), I2)
    assert np.allclose(out, 2 * I2) and np.allclose(symplectic_eigenvalues(out), 2)


def test_validate_examples():
    r = validate(GaussianChannel(2 * I2, 3 * I2))
    assert r.valid and abs(r.lmi_margin) <= 1e-9 and abs(r.det_margins[0]) <= 1e-9
    assert not validate(GaussianChannel(I2, -0.1 * I2)).valid
    assert validate(identity_channel()).valid


def test_is_pure_channel_examples():
    assert is_pure_channel(GaussianChannel(2 * I2, 3 * I2))
    assert is_pure_channel(identity_channel())
    assert not is_pure_channel(classical_noise(I2))


def test_named_channels():
    assert np.allclose(atten_amp(1.0).Y, 0) and np.allclose(atten_amp(1.0).X, I2)
    bath = 3 * I2
    assert np.allclose(apply(thermal_bath(1.0, 0.0, bath), 2 * I2), 2 * I2)
    far = thermal_bath(1.0, 60.0, bath)
    assert np.allclose(apply(far, np.diag([5.0, 0.2])), bath)


def test_tensor():
    ch = atten_amp(0.3)
    assert tensor([ch]) == ch
    t = tensor([ch, classical_noise(2 * I2)])
    assert t.X.shape == (4, 4) and not t.X[:2, 2:].any() and not t.Y[:2, 2:].any()
    assert t.mode_partition == (1, 1)


def test_tensor_validity_is_conjunction():
    rng = np.random.default_rng(1)
    for _ in range(10):
        good = random_single_mode(rng)
        bad = random_single_mode(rng, valid=False)
        assert validate(tensor([good, good])).valid
        assert not validate(tensor([good, bad])).valid


def test_lmi_and_determinant_criteria_agree():
    rng = np.random.default_rng(2)
    for _ in range(500):
        x = rng.normal(size=(2, 2))
        a = rng.normal(size=(2, 2))
        y = a @ a.T + rng.uniform(0, 3) * I2 - rng.uniform(0, 0.3) * I2
        y = (y + y.T) / 2
        assert validate(GaussianChannel(x, y)).consistent


def test_apply_preserves_physicality():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(1, 4))
        ch = tensor([random_single_mode(rng) for _ in range(n)])
        g = random_covariance_matrix(n, rng)
        out = apply(ch, g)
        h = out + 1j * symplectic_form(n)
        assert np.linalg.eigvalsh(h)[0] >= -1e-9


def test_apply_rejects_invalid_channel():
    with pytest.raises(InvalidChannel):
        apply(GaussianChannel(I2, -0.1 * I2), I2)


def test_channel_shape_checks():
    with pytest.raises(InvalidChannel):
        GaussianChannel(np.eye(3), np.eye(3))
    with pytest.raises(InvalidChannel):
        GaussianChannel(I2, [[1, 0.5], [0, 1]])


def test_reduce_examples():
    cert = reduce_standard_form(GaussianChannel(np.diag([1.0, 4.0]), np.diag([8.0, 2.0])))
    assert np.allclose(cert.reduced.X, 2 * I2) and np.allclose(cert.reduced.Y, 4 * I2)
    ch = classical_noise(1.5 * I2)
    assert np.allclose(reduce_standard_form(ch).reduced.X, I2)
    assert np.allclose(reduce_standard_form(ch).reduced.Y, 1.5 * I2)
    cert = reduce_standard_form(GaussianChannel(np.diag([1.0, -1.0]), I2))
    assert cert.sign_flip_applied and np.allclose(cert.reduced.X, I2)


def test_reduce_scales_and_purity_invariance():
    rng = np.random.default_rng(4)
    for _ in range(20):
        fs = [random_single_mode(rng) for _ in range(2)]
        if np.sign(np.linalg.det(fs[0].X)) != np.sign(np.linalg.det(fs[1].X)):
            continue
        ch = tensor(fs)
        cert = reduce_standard_form(ch)
        for f, r in zip(fs, cert.reduced.factors()):
            assert np.allclose(r.X, np.sqrt(abs(np.linalg.det(f.X))) * I2, atol=1e-9)
            assert np.allclose(r.Y, np.sqrt(np.linalg.det(f.Y)) * I2, atol=1e-9)
        for m in cert.left + cert.right:
            assert is_symplectic(m, 1e-10)
        g = pure_cm_from_params(random_pure_params(2, rng))
        lifted = cert.lift_input(g)
        assert np.allclose(
            symplectic_eigenvalues(apply(ch, lifted)),
            symplectic_eigenvalues(apply(cert.reduced, g)),
            rtol=1e-8,
        )
        assert np.allclose(cert.lower_input(lifted), g, atol=1e-9)


def test_reduce_rejects_outside_hypotheses():
    with pytest.raises(HypothesisError):
        reduce_standard_form(GaussianChannel(np.diag([1.0, 0.0]), I2))
    mixed = tensor([classical_noise(I2), GaussianChannel(np.diag([1.0, -1.0]), 2 * I2)])
    with pytest.raises(HypothesisError):
        reduce_standard_form(mixed)


def test_json_named_kinds(tmp_path):
    spec = {
        "factors": [
            {"kind": "attenuation", "epsilon": 0.5},
            {"kind": "amplification", "epsilon": 2.0},
            {"kind": "classical_noise", "y": 0.5, "repeat": 2},
            {"kind": "thermal_bath", "rate": 1.0, "time": 0.5, "bath_nu": 3.0},
        ]
    }
    ch = channel_from_dict(spec)
    assert ch.n == 5 and ch.mode_partition == (1,) * 5
    path = tmp_path / "c.json"
    path.write_text(json.dumps(spec))
    assert load_channel(path) == ch


def test_json_flat_matrices():
    ch = channel_from_dict({"factors": [{"modes": 1, "X": [1, 0, 0, 1], "Y": [2, 0, 0, 2]}]})
    assert np.allclose(ch.Y, 2 * I2)


@pytest.mark.parametrize(
    "spec",
    [
        {},
        {"factors": []},
        {"factors": [{"kind": "bogus"}]},
        {"factors": [{"kind": "attenuation", "epsilon": 1.5}]},
        {"factors": [{"X": [[1, 0], [0, 1]]}]},
        {"n": 3, "factors": [{"kind": "classical_noise", "y": 1}]},
    ],
)
def test_json_rejects(spec):
    with pytest.raises(InvalidChannel):
        channel_from_dict(spec)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(1, 3))
def test_json_round_trip(seed, k):
    rng = np.random.default_rng(seed)
    ch = tensor([random_single_mode(rng) for _ in range(k)])
    again = channel_from_dict(json.loads(json.dumps(channel_to_dict(ch))))
    assert again == ch
