"""Maximum-likelihood fitters for the ZNIB family.

Two inference routes:

* ``fit_em`` — EM for models whose inflation weights are unrelated to the
  success probability (constant hurdle or covariate softmax).  The E-step
  computes component responsibilities; the M-step splits into a soft-target
  multinomial logistic regression for the inflation logits and a weighted
  binomial logistic regression for the success parameters.
* ``fit_powerlink`` / ``fit_grouped_hurdle`` — direct Newton ascent of the
  observed-data log-likelihood for power-link models and for grouped
  (count-of-counts) hurdle fits, including the beta-binomial families.

All log-likelihoods include the log C(N_i, y_i) constants, so absolute AIC
values are comparable across families.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, expit, gammaln, logit, xlog1py, xlogy

from .distributions import LOGIT_CLAMP
from .model import (
    BetaBinShapes,
    ConstantHurdle,
    ConstantLogit,
    Dataset,
    Family,
    LogitLinear,
    ModelSpec,
    NoInflation,
    PowerLink,
    SoftmaxCovariate,
    evaluate_links,
    param_names,
)
from .optim import (
    NewtonOptions,
    central_diff_hessian,
    irls_binomial,
    multinomial_logit_fit,
    newton_maximize,
)

__all__ = [
    "FitResult",
    "e_step",
    "fit_em",
    "fit_binomial",
    "powerlink_loglik",
    "powerlink_score",
    "fit_powerlink",
    "fit_grouped_hurdle",
    "fit_model",
    "observed_loglik",
]

BOUNDARY_MARGIN = 1e-9


@dataclass
class FitResult:
    """Packed estimates plus the usual post-fit quantities."""

    spec: ModelSpec
    estimates: np.ndarray
    names: list
    loglik: float
    aic: float
    std_errors: np.ndarray
    n_params: int
    converged: bool
    iterations: int
    fitted: np.ndarray  # columns (p, q0, qN) per observation
    boundary_flags: np.ndarray
    data: Dataset = field(repr=False, default=None)
    expected_counts: np.ndarray = None
    trace: list = field(repr=False, default=None)

    def params(self):
        return dict(zip(self.names, self.estimates.tolist()))


def _binom_log_pmf_rows(y, n, p):
    y = np.asarray(y, dtype=float)
    n = np.asarray(n, dtype=float)
    return (
        gammaln(n + 1.0)
        - gammaln(y + 1.0)
        - gammaln(n - y + 1.0)
        + xlogy(y, p)
        + xlog1py(n - y, -p)
    )


def _betabin_log_pmf_rows(y, n, r1, r2):
    y = np.asarray(y, dtype=float)
    n = np.asarray(n, dtype=float)
    return (
        gammaln(n + 1.0)
        - gammaln(y + 1.0)
        - gammaln(n - y + 1.0)
        + gammaln(y + r1)
        + gammaln(n - y + r2)
        - gammaln(n + r1 + r2)
        + gammaln(r1 + r2)
        - gammaln(r1)
        - gammaln(r2)
    )


def _mixture_log_pmf(y, n, log_body, q0, qN):
    """Row-wise log of q0*1[y=0] + qN*1[y=N] + (1-q0-qN)*exp(log_body)."""
    body = 1.0 - q0 - qN
    with np.errstate(divide="ignore"):
        t0 = np.where(y == 0, np.log(np.where(q0 > 0, q0, 1.0)), -np.inf)
        t0 = np.where((y == 0) & (q0 > 0), t0, -np.inf)
        tN = np.where((y == n) & (qN > 0), np.log(np.where(qN > 0, qN, 1.0)), -np.inf)
        tb = np.where(body > 0, np.log(np.where(body > 0, body, 1.0)) + log_body, -np.inf)
    stacked = np.stack([t0, tN, tb])
    mx = stacked.max(axis=0)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    out = mx + np.log(np.exp(stacked - mx).sum(axis=0))
    return out


def observed_loglik(spec: ModelSpec, packed, data: Dataset) -> float:
    """Observed-data log-likelihood (multiplicities included)."""
    p, q0, qN = evaluate_links(spec, packed, data)
    if isinstance(spec.success, BetaBinShapes):
        r1, r2 = np.exp(packed[0]), np.exp(packed[1])
        log_body = _betabin_log_pmf_rows(data.y, data.n, r1, r2)
    else:
        log_body = _binom_log_pmf_rows(data.y, data.n, p)
    rows = _mixture_log_pmf(data.y, data.n, log_body, q0, qN)
    return float(np.sum(data.mult * rows))


def e_step(data: Dataset, p, q0, qN) -> np.ndarray:
    """Responsibility matrix Z (n x 3): structural-zero, structural-N, body.

    Interior observations are deterministically in the body component.
    """
    y, n = data.y, data.n
    body = 1.0 - q0 - qN
    m0 = np.where(y == 0, q0, 0.0)
    mN = np.where(y == n, qN, 0.0)
    mb = body * np.exp(_binom_log_pmf_rows(y, n, p))
    total = m0 + mN + mb
    dead = np.flatnonzero(total <= 0.0)
    if dead.size:
        raise ValueError(
            f"all mixture components have zero mass for rows {dead.tolist()}"
        )
    Z = np.column_stack([m0 / total, mN / total, mb / total])
    return Z


def _success_design(spec, data):
    if isinstance(spec.success, ConstantLogit):
        return np.ones((data.n_obs, 1))
    return np.column_stack([data.column(c) for c in spec.success.columns])


def _inflation_design(spec, data):
    if isinstance(spec.inflation, ConstantHurdle):
        return np.ones((data.n_obs, 1))
    return np.column_stack([data.column(c) for c in spec.inflation.columns])


def _boundary_flags(estimates):
    return np.abs(estimates) >= LOGIT_CLAMP - BOUNDARY_MARGIN


def _finish(
    spec, data, estimates, loglik, converged, iterations,
    expected_counts=None, trace=None, extra_boundary=None,
):
    from .inference import aic as aic_fn, observed_info_se_from_objective

    estimates = np.asarray(estimates, dtype=float)
    names = param_names(spec)
    flags = _boundary_flags(estimates)
    if extra_boundary is not None:
        flags = flags | extra_boundary
    p, q0, qN = evaluate_links(spec, estimates, data)
    se, se_flags = observed_info_se_from_objective(
        lambda v: observed_loglik(spec, v, data), estimates
    )
    return FitResult(
        spec=spec,
        estimates=estimates,
        names=names,
        loglik=float(loglik),
        aic=aic_fn(loglik, estimates.size),
        std_errors=se,
        n_params=estimates.size,
        converged=bool(converged),
        iterations=int(iterations),
        fitted=np.column_stack([p, q0, qN]),
        boundary_flags=flags | se_flags,
        data=data,
        expected_counts=expected_counts,
        trace=trace,
    )


# --- EM ----------------------------------------------------------------------


def _em_start(data: Dataset, spec: ModelSpec):
    y, n, m = data.y, data.n, data.mult
    interior = (y > 0) & (y < n)
    if interior.any():
        p0 = float(np.sum(m[interior] * y[interior]) / np.sum(m[interior] * n[interior]))
    else:
        p0 = float(np.sum(m * y) / max(np.sum(m * n), 1.0))
    p0 = float(np.clip(p0, 1e-3, 1 - 1e-3))
    total = m.sum()
    obs0 = np.sum(m * (y == 0)) / total
    obsN = np.sum(m * (y == n)) / total
    pred0 = np.sum(m * np.exp(xlog1py(n, -p0))) / total
    predN = np.sum(m * np.exp(xlogy(n, p0))) / total
    ex0 = np.clip(obs0 - pred0, 1e-4, 1 - 1e-4)
    exN = np.clip(obsN - predN, 1e-4, 1 - 1e-4)
    theta0 = float(np.clip(np.log(ex0 / max(1.0 - ex0 - exN, 1e-4)), -5.0, 5.0))
    thetaN = float(np.clip(np.log(exN / max(1.0 - ex0 - exN, 1e-4)), -5.0, 5.0))

    if isinstance(spec.success, ConstantLogit):
        succ = np.array([logit(p0)])
    else:
        succ = np.zeros(len(spec.success.columns))
        if "const" in spec.success.columns:
            succ[spec.success.columns.index("const")] = logit(p0)
    if isinstance(spec.inflation, ConstantHurdle):
        infl = []
        if spec.zero_inflated:
            infl.append(theta0)
        if spec.n_inflated:
            infl.append(thetaN)
        infl = np.array(infl)
    else:
        cols = spec.inflation.columns
        block0 = np.zeros(len(cols))
        blockN = np.zeros(len(cols))
        if "const" in cols:
            block0[cols.index("const")] = theta0
            blockN[cols.index("const")] = thetaN
        parts = []
        if spec.zero_inflated:
            parts.append(block0)
        if spec.n_inflated:
            parts.append(blockN)
        infl = np.concatenate(parts)
    return np.concatenate([succ, infl])


def fit_em(data: Dataset, spec: ModelSpec, max_iter=500, tol=1e-8) -> FitResult:
    """EM fit for ZIB / NIB / ZNIB with hurdle or covariate-softmax inflation."""
    if spec.family not in (Family.ZIB, Family.NIB, Family.ZNIB):
        raise ValueError(f"fit_em does not handle family {spec.family.value}")
    if not isinstance(spec.inflation, (ConstantHurdle, SoftmaxCovariate)):
        raise ValueError("fit_em needs a constant-hurdle or covariate inflation link")
    packed = _em_start(data, spec)
    Xs = _success_design(spec, data)
    Xi = _inflation_design(spec, data)
    m = data.mult
    ll = observed_loglik(spec, packed, data)
    trace = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p, q0, qN = evaluate_links(spec, packed, data)
        Z = e_step(data, p, q0, qN)
        # M-step 1: inflation logits from a soft-target softmax regression
        infl = multinomial_logit_fit(
            Z, Xi, mult=m,
            include_zero=spec.zero_inflated, include_n=spec.n_inflated,
        )
        # M-step 2: success parameters from a weighted binomial regression
        succ = irls_binomial(data.y * m, data.n * m, Xs, w=Z[:, 2])
        packed_new = np.concatenate([succ, infl])
        ll_new = observed_loglik(spec, packed_new, data)
        drop_tol = 1e-10 * max(1.0, abs(ll))
        if ll_new < ll - drop_tol:
            raise RuntimeError(
                f"EM log-likelihood decreased at iteration {it}: {ll} -> {ll_new}"
            )
        packed = packed_new
        trace.append(ll_new)
        if abs(ll_new - ll) < tol:
            ll = ll_new
            converged = True
            break
        ll = ll_new
    return _finish(spec, data, packed, ll, converged, it, trace=trace)


def fit_binomial(data: Dataset, spec: ModelSpec = None) -> FitResult:
    """Plain binomial logistic fit (the no-inflation baseline)."""
    if spec is None:
        spec = ModelSpec(Family.BINOMIAL, success=ConstantLogit())
    if spec.family is not Family.BINOMIAL:
        raise ValueError("fit_binomial requires the binomial family")
    Xs = _success_design(spec, data)
    m = data.mult
    coef = irls_binomial(data.y * m, data.n * m, Xs)
    ll = observed_loglik(spec, coef, data)
    expected = _expected_counts(spec, coef, data)
    return _finish(spec, data, coef, ll, True, 1, expected_counts=expected)


# --- power link --------------------------------------------------------------


def _powerlink_parts(params, data: Dataset, columns):
    X = np.column_stack([data.column(c) for c in columns])
    w = X.shape[1]
    beta = params[:w]
    alpha0 = np.exp(params[w])
    alphaN = np.exp(params[w + 1])
    eta = X @ beta
    log_p = -np.logaddexp(0.0, -eta)   # log expit(eta)
    log_1mp = -np.logaddexp(0.0, eta)
    a = alpha0 * log_p
    b = alphaN * log_1mp
    mx = np.maximum(np.maximum(a, b), 0.0)
    S = np.exp(a - mx) + np.exp(b - mx) + np.exp(-mx)
    lse = mx + np.log(S)
    q0 = np.exp(a - lse)
    qN = np.exp(b - lse)
    return X, beta, alpha0, alphaN, eta, log_p, log_1mp, a, b, lse, q0, qN


def powerlink_loglik(params, data: Dataset, columns=None) -> float:
    """Observed-data log-likelihood of the ZNIB power-link model.

    ``params`` = (success coefficients, log alpha0, log alphaN).  The
    mixture pmf form is used directly; it satisfies the response-reflection
    symmetry l(a0, aN, beta; Y) = l(aN, a0, -beta; N-Y) identically.
    """
    columns = data.columns if columns is None else columns
    params = np.asarray(params, dtype=float)
    (X, beta, alpha0, alphaN, eta, log_p, log_1mp, a, b, lse, q0, qN) = _powerlink_parts(
        params, data, columns
    )
    y, n = data.y, data.n
    f = (
        gammaln(n + 1.0) - gammaln(y + 1.0) - gammaln(n - y + 1.0)
        + y * log_p + (n - y) * log_1mp
    )
    t0 = np.where(y == 0, a, -np.inf)
    tN = np.where(y == n, b, -np.inf)
    stacked = np.stack([t0, tN, f])
    mx = stacked.max(axis=0)
    log_num = mx + np.log(np.exp(stacked - mx).sum(axis=0))
    return float(np.sum(data.mult * (log_num - lse)))


def powerlink_score(params, data: Dataset, columns=None) -> np.ndarray:
    """Analytic gradient of ``powerlink_loglik``."""
    columns = data.columns if columns is None else columns
    params = np.asarray(params, dtype=float)
    (X, beta, alpha0, alphaN, eta, log_p, log_1mp, a, b, lse, q0, qN) = _powerlink_parts(
        params, data, columns
    )
    y, n, m = data.y, data.n, data.mult
    p = np.exp(log_p)
    f = (
        gammaln(n + 1.0) - gammaln(y + 1.0) - gammaln(n - y + 1.0)
        + y * log_p + (n - y) * log_1mp
    )
    t0 = np.where(y == 0, a, -np.inf)
    tN = np.where(y == n, b, -np.inf)
    stacked = np.stack([t0, tN, f])
    mx = stacked.max(axis=0)
    num = np.exp(stacked - mx)
    total = num.sum(axis=0)
    w0 = num[0] / total  # responsibilities of the three components
    wN = num[1] / total
    wb = num[2] / total
    da = alpha0 * (1.0 - p)        # d a / d eta
    db = -alphaN * p               # d b / d eta
    deta = (w0 - q0) * da + (wN - qN) * db + wb * (y - n * p)
    g_beta = X.T @ (m * deta)
    g_la0 = float(np.sum(m * (w0 - q0) * a))
    g_laN = float(np.sum(m * (wN - qN) * b))
    return np.concatenate([g_beta, [g_la0, g_laN]])


def fit_powerlink(data: Dataset, spec: ModelSpec, options=None) -> FitResult:
    """Newton–Raphson fit of the ZNIB power-link model."""
    if spec.family is not Family.ZNIB or not isinstance(spec.inflation, PowerLink):
        raise ValueError("fit_powerlink requires a ZNIB family with a power link")
    columns = (
        spec.success.columns if isinstance(spec.success, LogitLinear) else ("const",)
    )
    Xs = np.column_stack([data.column(c) for c in columns])
    y, n, m = data.y, data.n, data.mult
    interior = (y > 0) & (y < n)
    if interior.any():
        beta0 = irls_binomial(
            y[interior] * m[interior], n[interior] * m[interior], Xs[interior]
        )
    else:
        beta0 = np.zeros(Xs.shape[1])
    start = np.concatenate([beta0, [0.0, 0.0]])
    res = newton_maximize(
        lambda v: powerlink_loglik(v, data, columns),
        start,
        grad=lambda v: powerlink_score(v, data, columns),
        options=options or NewtonOptions(),
    )
    extra = np.zeros(res.argmax.size, dtype=bool)
    extra[-2:] = np.abs(res.argmax[-2:]) > 20.0  # runaway log alpha
    return _finish(
        spec, data, res.argmax, res.value, res.converged, res.iterations,
        extra_boundary=extra,
    )


# --- grouped hurdle ----------------------------------------------------------


def _hurdle_parts(family, params, y, n):
    """Per-row (log_body, q0, qN, extras) for the grouped hurdle families."""
    if family is Family.BINOMIAL:
        p = expit(params[0])
        return _binom_log_pmf_rows(y, n, p), np.zeros(y.size), np.zeros(y.size)
    if family is Family.BETA_BINOMIAL:
        r1, r2 = np.exp(params[0]), np.exp(params[1])
        return _betabin_log_pmf_rows(y, n, r1, r2), np.zeros(y.size), np.zeros(y.size)
    if family is Family.ZNIBB:
        r1, r2 = np.exp(params[0]), np.exp(params[1])
        t0, tN = params[2], params[3]
        d = 1.0 + np.exp(t0) + np.exp(tN)
        return _betabin_log_pmf_rows(y, n, r1, r2), np.full(y.size, np.exp(t0) / d), np.full(
            y.size, np.exp(tN) / d
        )
    if family is Family.ZNIB:
        p = expit(params[0])
        t0, tN = params[1], params[2]
        d = 1.0 + np.exp(t0) + np.exp(tN)
        return _binom_log_pmf_rows(y, n, p), np.full(y.size, np.exp(t0) / d), np.full(
            y.size, np.exp(tN) / d
        )
    raise ValueError(f"unsupported hurdle family {family!r}")


def hurdle_loglik(family, params, data: Dataset) -> float:
    log_body, q0, qN = _hurdle_parts(family, params, data.y, data.n)
    rows = _mixture_log_pmf(data.y, data.n, log_body, q0, qN)
    return float(np.sum(data.mult * rows))


def hurdle_score(family, params, data: Dataset) -> np.ndarray:
    """Analytic gradient of ``hurdle_loglik`` for each supported family."""
    y, n, m = data.y.astype(float), data.n.astype(float), data.mult
    log_body, q0, qN = _hurdle_parts(family, params, data.y, data.n)
    body_w = 1.0 - q0 - qN
    t0 = np.where((data.y == 0) & (q0 > 0), np.log(np.where(q0 > 0, q0, 1.0)), -np.inf)
    tN = np.where((data.y == data.n) & (qN > 0), np.log(np.where(qN > 0, qN, 1.0)), -np.inf)
    with np.errstate(divide="ignore"):
        tb = np.where(body_w > 0, np.log(np.where(body_w > 0, body_w, 1.0)) + log_body, -np.inf)
    stacked = np.stack([t0, tN, tb])
    mx = stacked.max(axis=0)
    num = np.exp(stacked - mx)
    total = num.sum(axis=0)
    w0, wN, wb = num[0] / total, num[1] / total, num[2] / total

    if family is Family.BINOMIAL:
        p = expit(params[0])
        return np.array([np.sum(m * (y - n * p))])
    if family is Family.ZNIB:
        p = expit(params[0])
        return np.array(
            [
                np.sum(m * wb * (y - n * p)),
                np.sum(m * (w0 - q0)),
                np.sum(m * (wN - qN)),
            ]
        )
    r1, r2 = np.exp(params[0]), np.exp(params[1])
    d_lr1 = r1 * (digamma(y + r1) - digamma(n + r1 + r2) + digamma(r1 + r2) - digamma(r1))
    d_lr2 = r2 * (
        digamma(n - y + r2) - digamma(n + r1 + r2) + digamma(r1 + r2) - digamma(r2)
    )
    if family is Family.BETA_BINOMIAL:
        return np.array([np.sum(m * d_lr1), np.sum(m * d_lr2)])
    # ZNIBB
    return np.array(
        [
            np.sum(m * wb * d_lr1),
            np.sum(m * wb * d_lr2),
            np.sum(m * (w0 - q0)),
            np.sum(m * (wN - qN)),
        ]
    )


def _moment_start_betabin(data):
    y, n, m = data.y.astype(float), data.n.astype(float), data.mult
    N = float(n[0])
    mean = np.sum(m * y) / m.sum()
    var = np.sum(m * (y - mean) ** 2) / m.sum()
    p_hat = np.clip(mean / N, 1e-3, 1 - 1e-3)
    denom = N * p_hat * (1 - p_hat)
    rho = (var / denom - 1.0) / max(N - 1.0, 1.0) if denom > 0 else 0.0
    rho = float(np.clip(rho, 1e-4, 0.5))
    total_shape = (1.0 - rho) / rho
    r1 = max(total_shape * p_hat, 1e-2)
    r2 = max(total_shape * (1 - p_hat), 1e-2)
    return np.log([r1, r2])


def fit_grouped_hurdle(data: Dataset, family, options=None) -> FitResult:
    """Newton fit of a constant-parameter (hurdle) model on grouped counts.

    Requires a common sum constraint N across rows.  Emits per-cell
    expected counts total * pmf(k) alongside the usual fit summary.
    """
    if isinstance(family, str):
        family = Family(family)
    if not np.all(data.n == data.n[0]):
        raise ValueError("grouped hurdle fits require a common N across rows")
    if family is Family.BINOMIAL:
        spec = ModelSpec(Family.BINOMIAL, success=ConstantLogit())
        start = np.array(
            [logit(np.clip(np.sum(data.mult * data.y) / np.sum(data.mult * data.n), 1e-6, 1 - 1e-6))]
        )
    elif family is Family.BETA_BINOMIAL:
        spec = ModelSpec(Family.BETA_BINOMIAL, success=BetaBinShapes())
        start = _moment_start_betabin(data)
    elif family is Family.ZNIBB:
        spec = ModelSpec(Family.ZNIBB, success=BetaBinShapes(), inflation=ConstantHurdle())
        start = np.concatenate([_moment_start_betabin(data), [-7.0, -7.0]])
    elif family is Family.ZNIB:
        spec = ModelSpec(Family.ZNIB, success=ConstantLogit(), inflation=ConstantHurdle())
        p0 = np.clip(np.sum(data.mult * data.y) / np.sum(data.mult * data.n), 1e-6, 1 - 1e-6)
        start = np.array([logit(p0), -3.0, -3.0])
    else:
        raise ValueError(f"unsupported grouped hurdle family {family!r}")
    res = newton_maximize(
        lambda v: hurdle_loglik(family, v, data),
        start,
        grad=lambda v: hurdle_score(family, v, data),
        options=options or NewtonOptions(),
    )
    expected = _expected_counts(spec, res.argmax, data)
    return _finish(
        spec, data, res.argmax, res.value, res.converged, res.iterations,
        expected_counts=expected,
    )


def _expected_counts(spec, packed, data):
    if not data.grouped and not np.all(data.n == data.n[0]):
        return None
    p, q0, qN = evaluate_links(spec, packed, data)
    if isinstance(spec.success, BetaBinShapes):
        r1, r2 = np.exp(packed[0]), np.exp(packed[1])
        log_body = _betabin_log_pmf_rows(data.y, data.n, r1, r2)
    else:
        log_body = _binom_log_pmf_rows(data.y, data.n, p)
    pmf = np.exp(_mixture_log_pmf(data.y, data.n, log_body, q0, qN))
    return data.total_count * pmf


def fit_model(data: Dataset, spec: ModelSpec, **kwargs) -> FitResult:
    """Dispatch to the appropriate fitter for a model specification."""
    if isinstance(spec.inflation, PowerLink):
        return fit_powerlink(data, spec, **kwargs)
    if spec.family is Family.BINOMIAL and isinstance(spec.success, ConstantLogit) and data.grouped:
        return fit_grouped_hurdle(data, Family.BINOMIAL, **kwargs)
    if spec.family is Family.BINOMIAL:
        return fit_binomial(data, spec)
    if spec.family in (Family.BETA_BINOMIAL, Family.ZNIBB):
        return fit_grouped_hurdle(data, spec.family, **kwargs)
    if (
        spec.family is Family.ZNIB
        and isinstance(spec.inflation, ConstantHurdle)
        and isinstance(spec.success, ConstantLogit)
        and data.grouped
    ):
        return fit_grouped_hurdle(data, Family.ZNIB, **kwargs)
    return fit_em(data, spec, **kwargs)
