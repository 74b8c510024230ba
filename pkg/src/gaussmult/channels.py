"""Gaussian channels gamma -> X^T gamma X + Y: construction, complete positivity,
composition and reduction of single-mode tensor products to standard form."""

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import HypothesisError, InvalidChannel, InvalidCovarianceMatrix
from .symplectic import (
    ATOL,
    check_covariance_matrix,
    direct_sum,
    is_symplectic,
    num_modes,
    symplectic_form,
    williamson,
)


def _as_matrix(a, name):
    a = np.array(a, dtype=float)
    if a.ndim == 1:
        side = int(round(np.sqrt(a.size)))
        if side * side != a.size:
            raise InvalidChannel(f"{name} with {a.size} entries is not a square matrix")
        a = a.reshape(side, side)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] % 2:
        raise InvalidChannel(f"{name} must be a square matrix of even dimension, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidChannel(f"{name} has non-finite entries")
    a.setflags(write=False)
    return a


def _block_mask(partition):
    n = sum(partition)
    mask = np.zeros((2 * n, 2 * n), dtype=bool)
    start = 0
    for m in partition:
        mask[2 * start : 2 * (start + m), 2 * start : 2 * (start + m)] = True
        start += m
    return mask


@dataclass(frozen=True)
class GaussianChannel:
    """Channel acting on covariance matrices as gamma -> X^T gamma X + Y.

    ``mode_partition`` lists the mode counts of the tensor factors; X and Y
    must be block diagonal with respect to it.
    """

    X: np.ndarray
    Y: np.ndarray
    mode_partition: tuple = None

    def __post_init__(self):
        x = _as_matrix(self.X, "X")
        y = _as_matrix(self.Y, "Y")
        if x.shape != y.shape:
            raise InvalidChannel(f"X {x.shape} and Y {y.shape} differ in shape")
        scale = max(1.0, np.max(np.abs(y)))
        if np.max(np.abs(y - y.T)) > ATOL * scale:
            raise InvalidChannel("Y is not symmetric")
        n = x.shape[0] // 2
        partition = (n,) if self.mode_partition is None else tuple(int(m) for m in self.mode_partition)
        if any(m < 1 for m in partition) or sum(partition) != n:
            raise InvalidChannel(f"mode partition {partition} does not cover {n} modes")
        off = ~_block_mask(partition)
        if np.any(x[off] != 0) or np.any(y[off] != 0):
            raise InvalidChannel(f"X and Y are not block diagonal for partition {partition}")
        object.__setattr__(self, "X", x)
        object.__setattr__(self, "Y", y)
        object.__setattr__(self, "mode_partition", partition)

    @property
    def n(self):
        return self.X.shape[0] // 2

    def factors(self):
        """The tensor factors as separate channels."""
        out, start = [], 0
        for m in self.mode_partition:
            sl = slice(2 * start, 2 * (start + m))
            out.append(GaussianChannel(self.X[sl, sl], self.Y[sl, sl]))
            start += m
        return out

    def factor_determinants(self):
        return np.array([np.linalg.det(f.X) for f in self.factors()])

    def __eq__(self, other):
        if not isinstance(other, GaussianChannel):
            return NotImplemented
        return (
            self.mode_partition == other.mode_partition
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.Y, other.Y)
        )

    __hash__ = None


@dataclass(frozen=True)
class ValidationReport:
    """Complete-positivity verdict.

    ``lmi_margin`` is the smallest eigenvalue of Y + i sigma - i X^T sigma X.
    For single-mode factors ``det_margins`` holds det Y - (det X - 1)**2 and
    ``noise_margins`` the smallest eigenvalue of Y; ``consistent`` records
    whether both criteria agree factor by factor.
    """

    valid: bool
    lmi_margin: float
    det_margins: tuple = ()
    noise_margins: tuple = ()
    consistent: bool = True


def _lmi_margin(x, y):
    omega = symplectic_form(num_modes(x))
    h = y + 1j * omega - 1j * (x.T @ omega @ x)
    return float(np.linalg.eigvalsh((h + h.conj().T) / 2)[0])


def validate(ch, tol=ATOL):
    """Check complete positivity of ``ch`` by the LMI and, per single-mode factor, by determinants."""
    lmi = _lmi_margin(ch.X, ch.Y)
    dets, noises, consistent = [], [], True
    for f in ch.factors():
        if f.n != 1:
            continue
        det_margin = float(np.linalg.det(f.Y) - (np.linalg.det(f.X) - 1) ** 2)
        noise = float(np.linalg.eigvalsh(f.Y)[0])
        dets.append(det_margin)
        noises.append(noise)
        by_det = det_margin >= -tol and noise >= -tol
        by_lmi = _lmi_margin(f.X, f.Y) >= -tol
        consistent &= by_det == by_lmi
    return ValidationReport(
        valid=lmi >= -tol,
        lmi_margin=lmi,
        det_margins=tuple(dets),
        noise_margins=tuple(noises),
        consistent=consistent,
    )


def _require_valid(ch):
    report = validate(ch)
    if not report.valid:
        raise InvalidChannel(f"channel is not completely positive (LMI margin {report.lmi_margin:.3e})")


def apply(ch, gamma):
    """Output covariance matrix X^T gamma X + Y."""
    gamma = check_covariance_matrix(gamma)
    if gamma.shape != ch.X.shape:
        raise InvalidCovarianceMatrix(
            f"{num_modes(gamma)}-mode state does not fit a {ch.n}-mode channel"
        )
    _require_valid(ch)
    out = ch.X.T @ gamma @ ch.X + ch.Y
    return (out + out.T) / 2


def is_pure_channel(ch, tol=1e-8):
    """True if Y = -(X^T s X - s) Y^+ (X^T s X - s), Y^+ the pseudo-inverse."""
    omega = symplectic_form(ch.n)
    d = ch.X.T @ omega @ ch.X - omega
    rhs = -d @ np.linalg.pinv(ch.Y, rcond=1e-12, hermitian=True) @ d
    return bool(np.max(np.abs(ch.Y - rhs)) <= tol * max(1.0, np.max(np.abs(ch.Y))))


def identity_channel(n=1):
    return GaussianChannel(np.eye(2 * n), np.zeros((2 * n, 2 * n)))


def classical_noise(y, mode_partition=None):
    """Random Gaussian displacements with covariance Y: X = 1."""
    y = _as_matrix(y, "Y")
    if np.linalg.eigvalsh(y)[0] < -ATOL:
        raise InvalidChannel("classical noise covariance must be positive semidefinite")
    return GaussianChannel(np.eye(len(y)), y, mode_partition)


def atten_amp(epsilon, n=1):
    """Attenuator (epsilon < 1) or amplifier (epsilon > 1) on each of n modes.

    X = epsilon * 1 and Y = |1 - epsilon**2| * 1; the result is a tensor
    product of n identical single-mode channels.
    """
    if not epsilon > 0:
        raise InvalidChannel(f"epsilon must be positive, got {epsilon}")
    eye = np.eye(2 * n)
    return GaussianChannel(epsilon * eye, abs(1 - epsilon**2) * eye, (1,) * n)


def thermal_bath(rate, time, bath_cm):
    """Dissipation into a Gaussian reservoir: X = exp(-rate t / 2), Y = (1 - exp(-rate t)) gamma_B."""
    if rate < 0 or time < 0:
        raise InvalidChannel("coupling rate and time must be non-negative")
    try:
        bath_cm = check_covariance_matrix(bath_cm)
    except InvalidCovarianceMatrix as exc:
        raise InvalidChannel(f"invalid bath covariance matrix: {exc}") from None
    decay = np.exp(-rate * time) if rate and time else 1.0
    return GaussianChannel(np.sqrt(decay) * np.eye(len(bath_cm)), (1 - decay) * bath_cm)


def tensor(factors):
    """Tensor product of channels: X and Y become direct sums."""
    factors = list(factors)
    if not factors:
        raise ValueError("tensor needs at least one channel")
    return GaussianChannel(
        direct_sum(*(f.X for f in factors)),
        direct_sum(*(f.Y for f in factors)),
        sum((f.mode_partition for f in factors), ()),
    )


@dataclass(frozen=True)
class ReductionCertificate:
    """Symplectic change of frame bringing a single-mode tensor product to standard form.

    With ``L = direct_sum(left)`` and ``R = direct_sum(right)`` the reduced
    channel is ``X~ = L (theta X) R`` and ``Y~ = R^T Y R`` where theta is the
    time reversal applied when all determinants are negative.
    """

    original: GaussianChannel
    reduced: GaussianChannel
    left: tuple
    right: tuple
    sign_flip_applied: bool
    x_scales: np.ndarray = field(repr=False)
    y_scales: np.ndarray = field(repr=False)

    def _theta(self):
        signs = np.tile([1.0, -1.0], self.original.n) if self.sign_flip_applied else np.ones(2 * self.original.n)
        return np.diag(signs)

    def lift_input(self, gamma):
        """Input of the original channel with the same output spectrum as ``gamma`` on the reduced one."""
        lft = direct_sum(*self.left)
        theta = self._theta()
        out = theta @ lft.T @ gamma @ lft @ theta
        return (out + out.T) / 2

    def lower_input(self, gamma):
        """Inverse of :meth:`lift_input`."""
        linv = np.linalg.inv(direct_sum(*self.left))
        theta = self._theta()
        out = linv.T @ theta @ gamma @ theta @ linv
        return (out + out.T) / 2


def reduce_standard_form(ch, tol=ATOL):
    """Bring each single-mode factor to X~_i = sqrt|det X_i| 1, Y~_i = sqrt(det Y_i) 1.

    Raises:
        HypothesisError: a factor is not single-mode, a determinant of X_i is
            zero, the determinants have mixed signs, or some Y_i is singular
            but nonzero
    """
    if any(m != 1 for m in ch.mode_partition):
        raise HypothesisError("standard-form reduction needs single-mode factors")
    factors = ch.factors()
    dets = np.array([np.linalg.det(f.X) for f in factors])
    if np.any(np.abs(dets) <= tol):
        raise HypothesisError(f"zero determinant among X blocks: {dets}")
    if not (np.all(dets > 0) or np.all(dets < 0)):
        raise HypothesisError(f"X blocks have determinants of mixed sign: {dets}")
    flip = bool(dets[0] < 0)
    sigma_z = np.diag([1.0, -1.0])

    left, right, xs, ys = [], [], [], []
    for f in factors:
        x = sigma_z @ f.X if flip else f.X
        det_y = np.linalg.det(f.Y)
        if det_y > tol:
            w, nu = williamson(f.Y)
            t = w.T
            ys.append(nu[0])
        elif np.max(np.abs(f.Y)) <= tol:
            t = np.eye(2)
            ys.append(0.0)
        else:
            raise HypothesisError("singular nonzero noise matrix has no scalar standard form")
        u, s, vt = np.linalg.svd(x @ t)
        if np.linalg.det(u) < 0:
            u[:, 1] *= -1
            vt[1, :] *= -1
        z = np.diag([np.sqrt(s[1] / s[0]), np.sqrt(s[0] / s[1])])
        left.append(z @ u.T)
        right.append(t @ vt.T)
        xs.append(np.sqrt(s[0] * s[1]))

    for m in left + right:
        if not is_symplectic(m, 1e-10):
            raise ArithmeticError("reduction produced a non-symplectic transform")
    reduced = GaussianChannel(
        direct_sum(*(x * np.eye(2) for x in xs)),
        direct_sum(*(y * np.eye(2) for y in ys)),
        ch.mode_partition,
    )
    return ReductionCertificate(
        original=ch,
        reduced=reduced,
        left=tuple(left),
        right=tuple(right),
        sign_flip_applied=flip,
        x_scales=np.array(xs),
        y_scales=np.array(ys),
    )


# --- JSON channel specifications -------------------------------------------

_NAMED = ("attenuation", "amplification", "classical_noise", "thermal_bath")


def _factor_from_dict(d):
    if not isinstance(d, dict):
        raise InvalidChannel(f"factor must be an object, got {type(d).__name__}")
    kind = d.get("kind")
    modes = int(d.get("modes", 1))
    if kind is None:
        if "X" not in d or "Y" not in d:
            raise InvalidChannel("explicit factor needs both X and Y")
        ch = GaussianChannel(d["X"], d["Y"])
    elif kind in ("attenuation", "amplification"):
        eps = float(d["epsilon"])
        if kind == "attenuation" and not 0 < eps <= 1:
            raise InvalidChannel(f"attenuation needs 0 < epsilon <= 1, got {eps}")
        if kind == "amplification" and eps < 1:
            raise InvalidChannel(f"amplification needs epsilon >= 1, got {eps}")
        ch = atten_amp(eps, modes)
        ch = GaussianChannel(ch.X, ch.Y)
    elif kind == "classical_noise":
        y = d["Y"] if "Y" in d else float(d["y"]) * np.eye(2 * modes)
        ch = classical_noise(y)
    elif kind == "thermal_bath":
        bath = d["bath_cm"] if "bath_cm" in d else float(d.get("bath_nu", 1.0)) * np.eye(2 * modes)
        ch = thermal_bath(float(d["rate"]), float(d["time"]), bath)
    else:
        raise InvalidChannel(f"unknown channel kind {kind!r}; expected one of {_NAMED}")
    if "modes" in d and ch.n != modes:
        raise InvalidChannel(f"factor declares {modes} modes but has {ch.n}")
    return [ch] * int(d.get("repeat", 1))


def channel_from_dict(spec):
    """Build a channel from its JSON object form.

    ``{"n": int, "factors": [...]}`` where each factor is either
    ``{"modes", "X", "Y"}`` with row-major matrices or a named form
    ``{"kind": ..., params...}``.  An optional ``"repeat": k`` replicates a factor.
    """
    if not isinstance(spec, dict) or "factors" not in spec:
        raise InvalidChannel("channel spec needs a 'factors' list")
    factors = [ch for d in spec["factors"] for ch in _factor_from_dict(d)]
    if not factors:
        raise InvalidChannel("channel spec has no factors")
    ch = tensor(factors)
    if "n" in spec and int(spec["n"]) != ch.n:
        raise InvalidChannel(f"spec declares n = {spec['n']} but factors cover {ch.n} modes")
    return ch


def channel_to_dict(ch):
    return {
        "n": ch.n,
        "factors": [
            {"modes": f.n, "X": f.X.tolist(), "Y": f.Y.tolist()} for f in ch.factors()
        ],
    }


def load_channel(path):
    with open(path) as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidChannel(f"{path}: {exc}") from None
    return channel_from_dict(spec)
