"""Minimization of F_p over pure Gaussian inputs and multiplicativity verdicts.

F_p(gamma) is the product of f_p over the symplectic eigenvalues of gamma;
the maximal output p-norm xi_p of a channel satisfies
(2**n / xi_p)**p = inf F_p(output) over pure inputs.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, expm_frechet
from scipy.optimize import minimize

from .channels import GaussianChannel, apply, reduce_standard_form, tensor, validate
from .exceptions import DegenerateSpectrumError, HypothesisError, InvalidChannel
from .states import (
    F_p,
    PureStateParams,
    f_p_log_derivative,
    log_F_p_of_spectrum,
    pure_cm_from_params,
    random_pure_params,
    squeezing_diag,
    majorizes,
)
from .symplectic import (
    ATOL,
    check_covariance_matrix,
    generator_basis,
    matrix_exp,
    num_modes,
    symplectic_eigenvalue_derivative,
    symplectic_eigenvalues,
    williamson,
)

log = logging.getLogger(__name__)

MULTIPLICATIVITY_TOL = 1e-6
OFF_BLOCK_TOL = 1e-4


@dataclass(frozen=True)
class OptimizerConfig:
    p: float = 2.0
    starts: int = 16
    seed: int = 0
    max_iters: int = 2000
    objective_tol: float = 1e-10
    param_tol: float = 1e-8
    log_z_bound: float = 5.0
    reduce: bool = True

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"Renyi order must lie in (1, inf), got {self.p}")
        if self.starts < 1 or self.max_iters < 1:
            raise ValueError("starts and max_iters must be positive")
        if min(self.objective_tol, self.param_tol, self.log_z_bound) <= 0:
            raise ValueError("tolerances and the squeezing bound must be positive")


def objective(ch, p, params):
    """F_p of the channel output for the pure input with coordinates ``params``."""
    return F_p(apply(ch, pure_cm_from_params(params)), p)


# --- smooth objective in (l, log z) ------------------------------------------


class _LogObjective:
    """log F_p(X^T gamma(l, z) X + Y) and its gradient in x = (l, log z).

    The gradient uses d nu_j = tr_j(S d(out) S^T) / 2 in the Williamson frame
    S of the output.  Summed against f'/f this stays valid when symplectic
    eigenvalues coincide, since f'/f is constant on a degenerate cluster.
    """

    def __init__(self, ch, p):
        self.x_mat = ch.X
        self.y_mat = ch.Y
        self.p = p
        self.n = ch.n
        self.compact = generator_basis(self.n).compact_generators

    def cm(self, x):
        n = self.n
        a = np.tensordot(x[: n**2], self.compact, axes=1)
        e = expm(-a)
        g = e.T @ squeezing_diag(np.exp(x[n**2 :])) @ e
        return (g + g.T) / 2

    def value(self, x):
        out = self.x_mat.T @ self.cm(x) @ self.x_mat + self.y_mat
        return log_F_p_of_spectrum(symplectic_eigenvalues((out + out.T) / 2), self.p)

    def value_and_grad(self, x):
        n = self.n
        a = np.tensordot(x[: n**2], self.compact, axes=1)
        z = np.exp(x[n**2 :])
        d = squeezing_diag(z)
        e = expm(-a)
        gamma = e.T @ d @ e
        out = self.x_mat.T @ gamma @ self.x_mat + self.y_mat
        s, nus = williamson((out + out.T) / 2)
        nus = np.maximum(nus, 1.0)
        val = log_F_p_of_spectrum(nus, self.p)
        weights = np.repeat(f_p_log_derivative(nus, self.p), 2)
        g_out = 0.5 * (s.T * weights) @ s
        g_in = self.x_mat @ g_out @ self.x_mat.T
        grad = np.empty_like(x)
        egt = e @ g_in @ e.T
        grad[n**2 :] = z * np.diag(egt)[0::2] - np.diag(egt)[1::2] / z
        deg = d @ e @ g_in
        for i, gen in enumerate(self.compact):
            de = expm_frechet(-a, -gen, compute_expm=False)
            grad[i] = 2 * np.sum(deg * de)
        return val, grad


@dataclass
class _StartResult:
    index: int
    x: np.ndarray
    value: float
    converged: bool
    grad_norm: float


def _projected_grad_norm(grad, x, bounds_lo, bounds_hi):
    g = grad.copy()
    at_lo = (x <= bounds_lo + 1e-12) & (g > 0)
    at_hi = (x >= bounds_hi - 1e-12) & (g < 0)
    g[at_lo | at_hi] = 0.0
    return float(np.linalg.norm(g))


def _run_start(fun, x0, index, cfg, n):
    lo = np.concatenate([np.full(n**2, -np.inf), np.full(n, -cfg.log_z_bound)])
    hi = -lo
    hi[: n**2] = np.inf
    x0 = np.clip(x0, lo, hi)
    bounds = list(zip(np.where(np.isfinite(lo), lo, None), np.where(np.isfinite(hi), hi, None)))
    res = minimize(
        fun.value_and_grad,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": cfg.max_iters, "ftol": 1e-15, "gtol": 1e-11, "maxcor": 30},
    )
    x = res.x
    val, grad = fun.value_and_grad(x)
    pg = _projected_grad_norm(grad, x, lo, hi)
    converged = bool(res.success) or pg <= cfg.param_tol
    if not converged:
        # derivative-free polish when the quasi-Newton line search stalls
        nm = minimize(
            fun.value,
            x,
            method="Nelder-Mead",
            bounds=bounds,
            options={"maxiter": 200 * len(x), "xatol": cfg.param_tol, "fatol": cfg.objective_tol},
        )
        if nm.fun < val:
            x = nm.x
            val, grad = fun.value_and_grad(x)
            pg = _projected_grad_norm(grad, x, lo, hi)
        converged = bool(nm.success) or pg <= cfg.param_tol
    return _StartResult(index, x, float(val), converged, pg)


def _start_points(n, cfg, hint=None):
    points = [np.zeros(n**2 + n)]
    if hint is not None and cfg.starts > 1:
        points.append(np.asarray(hint, dtype=float))
    for i in range(len(points), cfg.starts):
        rng = np.random.default_rng([cfg.seed, i])
        points.append(random_pure_params(n, rng, log_z_scale=min(2.0, cfg.log_z_bound)).to_vector())
    return points


def _minimize(ch, cfg, hint=None):
    """Multi-start minimization of log F_p; deterministic in ``cfg.seed``."""
    fun = _LogObjective(ch, cfg.p)
    results = [
        _run_start(fun, x0, i, cfg, ch.n) for i, x0 in enumerate(_start_points(ch.n, cfg, hint))
    ]
    best = min(r.value for r in results)
    near = [r for r in results if r.value <= best + cfg.objective_tol * max(1.0, abs(best))]
    chosen = min(near, key=lambda r: (float(np.linalg.norm(r.x)), r.index))
    return chosen, results


# --- reports -----------------------------------------------------------------


@dataclass(frozen=True)
class PurityReport:
    """Result of :func:`optimize`.

    ``inf_F_p`` is the infimum of F_p over pure inputs, ``xi_p`` the maximal
    output p-norm and ``max_trace_power`` its p-th power.  Values for the
    tensor factors optimized on their own are in ``per_factor_optima``.
    ``argmin_cm`` is expressed for the original channel; when the standard-form
    reduction was used ``reduced_argmin_cm`` is the optimum of the reduced one.
    """

    channel: GaussianChannel
    p: float
    inf_F_p: float
    xi_p: float
    max_trace_power: float
    argmin_params: PureStateParams = None
    argmin_cm: np.ndarray = None
    reduced_argmin_cm: np.ndarray = None
    per_factor_optima: tuple = ()
    multiplicativity_ratio: float = 1.0
    verdict: str = "single factor"
    gradient_norm_at_argmin: float = 0.0
    status: str = "converged"
    attained_asymptotically: bool = False
    bound_active: bool = False
    reduction_used: bool = False
    start_values: tuple = field(default=(), repr=False)


def _reducible(ch):
    try:
        return reduce_standard_form(ch)
    except HypothesisError:
        return None


def _compact_index_map(partition):
    """Positions of each factor's compact generators inside the joint basis."""
    n = sum(partition)
    joint = generator_basis(n).compact_generators
    maps, start = [], 0
    for m in partition:
        sub = generator_basis(m).compact_generators
        idx = []
        for gen in sub:
            emb = np.zeros((2 * n, 2 * n))
            emb[2 * start : 2 * (start + m), 2 * start : 2 * (start + m)] = gen
            idx.append(int(np.flatnonzero([np.array_equal(emb, j) for j in joint])[0]))
        maps.append(idx)
        start += m
    return maps


def _joint_vector(partition, factor_vectors):
    n = sum(partition)
    l = np.zeros(n**2)
    logz = []
    for m, idx, v in zip(partition, _compact_index_map(partition), factor_vectors):
        l[idx] = v[: m**2]
        logz.extend(v[m**2 :])
    return np.concatenate([l, logz])


def _verdict(ratio, n_factors, trivial=False):
    if n_factors == 1:
        return "single factor"
    if trivial:
        return "trivially multiplicative"
    return "multiplicative" if abs(ratio - 1) <= MULTIPLICATIVITY_TOL else "not multiplicative"


def _asymptotic_report(ch, cfg, per_factor):
    value = F_p(ch.Y, cfg.p)
    factor_values = tuple(F_p(f.Y, cfg.p) for f in ch.factors()) if per_factor else (value,)
    ratio = value / np.prod(factor_values)
    return PurityReport(
        channel=ch,
        p=cfg.p,
        inf_F_p=value,
        xi_p=2**ch.n * value ** (-1 / cfg.p),
        max_trace_power=2 ** (cfg.p * ch.n) / value,
        per_factor_optima=factor_values,
        multiplicativity_ratio=float(ratio),
        verdict=_verdict(ratio, len(factor_values), trivial=True),
        attained_asymptotically=True,
    )


def optimize(ch, cfg=None, *, per_factor=True):
    """Minimize F_p over pure Gaussian inputs of ``ch``.

    Runs ``cfg.starts`` local quasi-Newton searches over (l, log z) with
    |log z_i| <= ``cfg.log_z_bound``.  A tensor product of single-mode factors
    whose X blocks have nonzero determinants of one sign is first reduced to
    standard form; the optimum is mapped back to the original frame.  When
    every X block is singular the infimum F_p(Y) is approached by infinite
    squeezing and reported without an argmin.

    With ``per_factor`` each tensor factor is also optimized alone and the
    joint search is seeded with the product of the factor optima.
    """
    cfg = cfg or OptimizerConfig()
    report = validate(ch)
    if not report.valid:
        raise InvalidChannel(f"channel is not completely positive (LMI margin {report.lmi_margin:.3e})")

    factors = ch.factors()
    dets = np.array([np.linalg.det(f.X) for f in factors])
    if np.all(np.abs(dets) <= ATOL) and all(f.n == 1 for f in factors):
        return _asymptotic_report(ch, cfg, per_factor)

    cert = _reducible(ch) if cfg.reduce else None
    work = cert.reduced if cert is not None else ch

    factor_reports = ()
    hint = None
    if per_factor and len(factors) > 1:
        work_factors = work.factors()
        factor_reports = tuple(optimize(f, cfg, per_factor=False) for f in work_factors)
        if not any(r.attained_asymptotically for r in factor_reports):
            hint = _joint_vector(
                work.mode_partition, [r.argmin_params.to_vector() for r in factor_reports]
            )

    chosen, results = _minimize(work, cfg, hint)
    params = PureStateParams.from_vector(work.n, chosen.x)
    work_cm = pure_cm_from_params(params)
    if cert is not None:
        argmin_cm = cert.lift_input(work_cm)
    else:
        argmin_cm = work_cm
    value = float(np.exp(chosen.value))

    if factor_reports:
        factor_values = tuple(r.inf_F_p for r in factor_reports)
    else:
        factor_values = (value,)
    ratio = value / float(np.prod(factor_values))
    bound_active = bool(np.any(np.abs(chosen.x[work.n**2 :]) >= cfg.log_z_bound - 1e-9))
    status = "converged" if chosen.converged else "not_converged"
    if not chosen.converged:
        log.warning("optimizer did not converge; best value %.17g", value)
    return PurityReport(
        channel=ch,
        p=cfg.p,
        inf_F_p=value,
        xi_p=float(2**ch.n * value ** (-1 / cfg.p)),
        max_trace_power=float(2 ** (cfg.p * ch.n) / value),
        argmin_params=params,
        argmin_cm=argmin_cm,
        reduced_argmin_cm=work_cm if cert is not None else None,
        per_factor_optima=factor_values,
        multiplicativity_ratio=float(ratio),
        verdict=_verdict(ratio, len(factor_values)),
        gradient_norm_at_argmin=chosen.grad_norm,
        status=status,
        bound_active=bound_active,
        reduction_used=cert is not None,
        start_values=tuple(float(np.exp(r.value)) for r in results),
    )


# --- stationarity ------------------------------------------------------------


@dataclass(frozen=True)
class GradientResult:
    """Derivatives of F_p along each generator of sp(2n, R).

    ``method`` is ``"analytic"`` or ``"finite_difference"`` (used when the
    output spectrum is degenerate).
    """

    values: np.ndarray
    method: str
    output_spectrum: np.ndarray

    @property
    def norm(self):
        return float(np.linalg.norm(self.values))


def _scalar_x(ch, tol=ATOL):
    x = ch.X[0, 0]
    if np.max(np.abs(ch.X - x * np.eye(2 * ch.n))) > tol:
        raise ValueError("gradient_at needs a reduced channel with X proportional to the identity")
    return x


def gradient_at(ch, p, gamma, h=1e-6):
    """Gradient of F_p(x**2 e^{k.K^T} gamma' e^{k.K} + Y') at k = 0.

    Here V brings the output x**2 gamma + Y to Williamson form, gamma' = V^T gamma V
    and Y' = V^T Y V.  Component i is
    F_p * sum_j f'(nu_j)/f(nu_j) * tr_j(x**2 (K_i^T gamma' + gamma' K_i)) / 2.
    """
    x = _scalar_x(ch)
    gamma = check_covariance_matrix(gamma)
    out = x**2 * gamma + ch.Y
    s, nus = williamson((out + out.T) / 2)
    v = s.T
    gp = v.T @ gamma @ v
    yp = v.T @ ch.Y @ v
    w = np.diag(np.repeat(nus, 2))
    basis = generator_basis(num_modes(gamma))
    try:
        fval = float(np.exp(log_F_p_of_spectrum(nus, p)))
        weights = f_p_log_derivative(np.maximum(nus, 1.0), p)
        grads = np.array(
            [
                fval * weights @ symplectic_eigenvalue_derivative(w, x**2 * (k.T @ gp + gp @ k))
                for k in basis.generators
            ]
        )
        return GradientResult(grads, "analytic", nus)
    except DegenerateSpectrumError:
        pass

    def h_fun(i, t):
        e = matrix_exp(t * basis.generators[i])
        g = x**2 * (e.T @ gp @ e) + yp
        return F_p((g + g.T) / 2, p)

    grads = np.array([(h_fun(i, h) - h_fun(i, -h)) / (2 * h) for i in range(len(basis))])
    return GradientResult(grads, "finite_difference", nus)


# --- multiplicativity --------------------------------------------------------


@dataclass(frozen=True)
class MultiplicativityRecord:
    """Joint versus per-factor optimum of a tensor product of channels.

    ``hypotheses`` lists the theorems whose assumptions the instance meets:
    ``"identical_single_mode"``, ``"equal_det_positive_noise"``,
    ``"p2_nonsingular"`` and ``"singular_x"``.  ``flags`` records
    assumptions that fail in a way the theorems do not decide.
    """

    p: float
    ratio: float
    joint_inf_F_p: float
    factor_inf_F_p: tuple
    off_block_norm: float
    verdict: str
    hypotheses: tuple
    flags: tuple
    report: PurityReport = field(repr=False)


def _off_block_norm(gamma, partition):
    if gamma is None:
        return 0.0
    mask = np.zeros(gamma.shape, dtype=bool)
    start = 0
    for m in partition:
        mask[2 * start : 2 * (start + m), 2 * start : 2 * (start + m)] = True
        start += m
    return float(np.linalg.norm(gamma[~mask]))


def hypotheses_of(factors, p, tol=1e-9):
    """Which multiplicativity theorems cover a list of factor channels, plus undecided flags."""
    single = all(f.n == 1 for f in factors)
    dets = np.array([np.linalg.det(f.X) for f in factors])
    hyps, flags = [], []
    if single and all(
        np.allclose(f.X, factors[0].X, atol=tol) and np.allclose(f.Y, factors[0].Y, atol=tol)
        for f in factors
    ):
        hyps.append("identical_single_mode")
    positive_noise = all(np.linalg.eigvalsh(f.Y)[0] > tol for f in factors)
    same_det = np.allclose(dets, dets[0], rtol=tol, atol=tol) and abs(dets[0]) > tol
    if single and positive_noise and same_det:
        hyps.append("equal_det_positive_noise")
    if abs(p - 2) <= 1e-12 and np.all(np.abs(dets) > tol):
        hyps.append("p2_nonsingular")
    if single and np.all(np.abs(dets) <= tol):
        hyps.append("singular_x")
    nonzero = dets[np.abs(dets) > tol]
    if single and len(nonzero) and not (np.all(nonzero > 0) or np.all(nonzero < 0)):
        flags.append("mixed_sign_determinants")
    if single and same_det and not positive_noise:
        flags.append("singular_noise")
    if single and np.any(np.abs(dets) <= tol) and not np.all(np.abs(dets) <= tol):
        flags.append("partially_singular_x")
    return tuple(hyps), tuple(flags)


def multiplicativity_check(factors, p=None, cfg=None):
    """Optimize the tensor product of ``factors`` and each factor; compare.

    The verdict is ``"multiplicative"`` when the ratio of the joint infimum to
    the product of the factor infima is within 1e-6 of one and the joint
    argmin has off-block norm below 1e-4.
    """
    cfg = cfg or OptimizerConfig()
    if p is not None and p != cfg.p:
        cfg = OptimizerConfig(**{**cfg.__dict__, "p": p})
    factors = list(factors)
    joint = tensor(factors)
    report = optimize(joint, cfg)
    gamma = report.reduced_argmin_cm if report.reduced_argmin_cm is not None else report.argmin_cm
    off = _off_block_norm(gamma, joint.mode_partition)
    hyps, flags = hypotheses_of(factors, cfg.p)
    if report.attained_asymptotically:
        verdict = report.verdict
    elif abs(report.multiplicativity_ratio - 1) <= MULTIPLICATIVITY_TOL and off <= OFF_BLOCK_TOL:
        verdict = "multiplicative"
    else:
        verdict = "not multiplicative"
    return MultiplicativityRecord(
        p=cfg.p,
        ratio=report.multiplicativity_ratio,
        joint_inf_F_p=report.inf_F_p,
        factor_inf_F_p=report.per_factor_optima,
        off_block_norm=off,
        verdict=verdict,
        hypotheses=hyps,
        flags=flags,
        report=report,
    )


# --- identical channels and majorization ------------------------------------


def identical_channel_spectrum(x, y, z):
    """Output symplectic eigenvalues of x**2 Z + y 1 for Z = diag(z1, 1/z1, ...).

    Each eigenvalue is sqrt(x**4 + y**2 + x**2 y (z_i + 1/z_i)), returned
    decreasingly.  ``z`` may be the squeezing vector or the 2n diagonal.
    """
    if not (x > 0 and y >= 0):
        raise ValueError(f"need x > 0 and y >= 0, got x={x}, y={y}")
    z = np.asarray(z, dtype=float)
    if z.ndim == 2:
        z = np.diag(z)[0::2]
    if np.any(z <= 0):
        raise ValueError("squeezing factors must be positive")
    nus = np.sqrt(x**4 + y**2 + x**2 * y * (z + 1 / z))
    return np.sort(nus)[::-1]


@dataclass(frozen=True)
class MajorizationAudit:
    samples: int
    passes: int
    worst_margin: float
    optimal_spectrum: np.ndarray
    verdicts: tuple = field(repr=False)


def majorization_audit(ch, samples, cfg=None, eps=1e-10, log_z_scale=1.5):
    """Check that the optimal output majorizes the outputs of random pure inputs.

    ``ch`` must be a tensor power of one single-mode channel.
    """
    cfg = cfg or OptimizerConfig()
    factors = ch.factors()
    if not ("identical_single_mode" in hypotheses_of(factors, cfg.p)[0]):
        raise HypothesisError("majorization audit needs a tensor power of one single-mode channel")
    report = optimize(ch, cfg)
    if report.attained_asymptotically:
        raise HypothesisError("optimum is not attained for singular X")
    best = symplectic_eigenvalues(apply(ch, report.argmin_cm))
    rng = np.random.default_rng([cfg.seed, 7919])
    verdicts, margins = [], []
    for _ in range(samples):
        gamma = pure_cm_from_params(random_pure_params(ch.n, rng, log_z_scale))
        result = majorizes(best, symplectic_eigenvalues(apply(ch, gamma)), eps=eps)
        verdicts.append(result)
        margins.append(result.margin)
    return MajorizationAudit(
        samples=samples,
        passes=sum(bool(v) for v in verdicts),
        worst_margin=float(min(margins)) if margins else 0.0,
        optimal_spectrum=best,
        verdicts=tuple(verdicts),
    )
