"""Numeric engine: Newton ascent with step halving, weighted binomial
logistic regression, soft-target multinomial logistic regression, and
central-difference derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .distributions import LOGIT_CLAMP

__all__ = [
    "NewtonOptions",
    "OptimResult",
    "newton_maximize",
    "irls_binomial",
    "multinomial_logit_fit",
    "central_diff_gradient",
    "central_diff_hessian",
]

FD_STEP_SCALE = 1e-4


@dataclass(frozen=True)
class NewtonOptions:
    max_iter: int = 200
    gradient_tol: float = 1e-6
    max_halvings: int = 30
    hessian_ridge: float = 1e-10

    def __post_init__(self):
        if min(self.max_iter, self.gradient_tol, self.max_halvings, self.hessian_ridge) <= 0:
            raise ValueError("all Newton options must be positive")


@dataclass
class OptimResult:
    argmax: np.ndarray
    value: float
    gradient_norm: float
    iterations: int
    converged: bool
    hessian: np.ndarray


def central_diff_gradient(f, x, step_scale=FD_STEP_SCALE):
    """Central-difference gradient with per-coordinate step
    h_j = step_scale * max(1, |x_j|)."""
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for j in range(x.size):
        h = step_scale * max(1.0, abs(x[j]))
        e = np.zeros(x.size)
        e[j] = h
        fp, fm = f(x + e), f(x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite objective perturbing coordinate {j}")
        g[j] = (fp - fm) / (2.0 * h)
    return g


def central_diff_hessian(f, x, step_scale=FD_STEP_SCALE):
    """Symmetrized central-difference Hessian."""
    x = np.asarray(x, dtype=float)
    m = x.size
    H = np.empty((m, m))
    h = np.array([step_scale * max(1.0, abs(x[j])) for j in range(m)])
    f0 = f(x)
    if not np.isfinite(f0):
        raise FloatingPointError("non-finite objective at expansion point")
    for j in range(m):
        ej = np.zeros(m)
        ej[j] = h[j]
        H[j, j] = (f(x + ej) - 2.0 * f0 + f(x - ej)) / h[j] ** 2
        for k in range(j + 1, m):
            ek = np.zeros(m)
            ek[k] = h[k]
            v = (
                f(x + ej + ek) - f(x + ej - ek) - f(x - ej + ek) + f(x - ej - ek)
            ) / (4.0 * h[j] * h[k])
            H[j, k] = H[k, j] = v
    if not np.all(np.isfinite(H)):
        raise FloatingPointError("non-finite Hessian entries")
    return (H + H.T) / 2.0


def _solve_ascent(H, g, base_ridge):
    """Solve H d = -g with escalating diagonal ridge repair.

    If the ridge cannot produce an ascent direction (strongly indefinite
    Hessian far from the optimum), fall back to steepest ascent; the line
    search downstream keeps the iteration safe.
    """
    scale = 1.0 + np.abs(np.diag(H))
    ridge = base_ridge
    while ridge <= 1e-2:
        try:
            d = np.linalg.solve(H - ridge * np.diag(scale), -g)
        except np.linalg.LinAlgError:
            ridge *= 10.0
            continue
        if np.all(np.isfinite(d)) and d @ g > 0:
            return d
        ridge *= 10.0
    gnorm = np.linalg.norm(g)
    if not np.isfinite(gnorm) or gnorm == 0.0:
        raise np.linalg.LinAlgError("Hessian remained unusable beyond maximum ridge")
    return g / max(1.0, gnorm)


def newton_maximize(f, start, grad=None, hess=None, options=None) -> OptimResult:
    """Maximize a smooth function by damped Newton ascent.

    ``grad``/``hess`` default to central differences of ``f``.  Step
    halving enforces a non-decreasing objective; convergence is declared
    at gradient sup-norm <= options.gradient_tol.
    """
    opts = options or NewtonOptions()
    x = np.asarray(start, dtype=float).copy()
    fx = f(x)
    if not np.isfinite(fx):
        raise ValueError("objective is not finite at the starting point")
    grad_fn = grad if grad is not None else (lambda z: central_diff_gradient(f, z))
    hess_fn = hess if hess is not None else (lambda z: central_diff_hessian(f, z))
    g = grad_fn(x)
    H = hess_fn(x)
    converged = np.max(np.abs(g)) <= opts.gradient_tol
    it = 0
    while not converged and it < opts.max_iter:
        it += 1
        d = _solve_ascent(H, g, opts.hessian_ridge)
        step = 1.0
        accepted = False
        for _ in range(opts.max_halvings):
            x_new = x + step * d
            f_new = f(x_new)
            if np.isfinite(f_new) and f_new >= fx:
                accepted = True
                break
            step /= 2.0
        stalled = (not accepted) or (f_new == fx and np.allclose(x_new, x))
        if stalled:
            # Improvements smaller than the floating-point resolution of the
            # objective cannot be detected; accept the point as converged if
            # the gradient is small relative to the objective scale.
            converged = np.max(np.abs(g)) <= opts.gradient_tol * max(1.0, abs(fx))
            if not accepted and not converged:
                raise RuntimeError(
                    f"line search failed at iteration {it}: "
                    f"objective {fx:.6g}, |grad|={np.max(np.abs(g)):.3g}"
                )
            break
        x, fx = x_new, f_new
        g = grad_fn(x)
        H = hess_fn(x)
        converged = np.max(np.abs(g)) <= opts.gradient_tol
    return OptimResult(
        argmax=x,
        value=float(fx),
        gradient_norm=float(np.max(np.abs(g))),
        iterations=it,
        converged=bool(converged),
        hessian=H,
    )


def _clip_coef(coef):
    return np.clip(coef, -LOGIT_CLAMP, LOGIT_CLAMP)


def binomial_loglik(coef, y, n, X, w):
    """Weighted binomial log-likelihood sum w_i [y_i eta_i - n_i log(1+e^eta_i)]."""
    eta = X @ coef
    return float(np.sum(w * (y * eta - n * np.logaddexp(0.0, eta))))


def binomial_score(coef, y, n, X, w):
    p = expit(X @ coef)
    return X.T @ (w * (y - n * p))


def irls_binomial(y, n, X, w=None, tol=1e-10, max_iter=100):
    """Maximum likelihood coefficients of a weighted binomial logistic
    regression via Newton (IRLS) steps.

    ``y`` and ``n`` may be fractional (soft targets).  Divergent
    coefficients are clamped at |coef| = 35; callers detect the boundary
    by coefficients sitting at the clamp.
    """
    y = np.asarray(y, dtype=float)
    n = np.asarray(n, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    w = np.ones(y.size) if w is None else np.asarray(w, dtype=float)
    if np.any(w < 0) or np.any(w > 1 + 1e-12):
        raise ValueError("row weights must lie in [0, 1]")
    m = X.shape[1]
    if w.sum() * n.sum() <= 0:
        return np.zeros(m)
    coef = np.zeros(m)
    ll = binomial_loglik(coef, y, n, X, w)
    for _ in range(max_iter):
        p = expit(X @ coef)
        g = X.T @ (w * (y - n * p))
        if np.max(np.abs(g)) <= 1e-8:
            break
        wt = w * n * p * (1.0 - p)
        H = -(X.T * wt) @ X
        try:
            d = _solve_ascent(H, g, 1e-10)
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError(
                "binomial regression design is rank deficient on the weighted support"
            )
        step = 1.0
        for _ in range(40):
            cand = _clip_coef(coef + step * d)
            ll_new = binomial_loglik(cand, y, n, X, w)
            if np.isfinite(ll_new) and ll_new >= ll:
                break
            step /= 2.0
        improve = ll_new - ll
        no_move = np.allclose(cand, coef)
        coef, ll = cand, ll_new
        if no_move and improve <= 0:
            break
        if improve < tol and np.max(np.abs(coef)) >= LOGIT_CLAMP:
            break
    return coef


def multinomial_loglik(params, Z, X, mult=None, include_zero=True, include_n=True):
    """Soft-target softmax log-likelihood for responsibilities Z (n x 3)."""
    mult = np.ones(Z.shape[0]) if mult is None else mult
    return _multinomial_obj(params, Z, X, mult, include_zero, include_n)


def multinomial_score(params, Z, X, mult=None, include_zero=True, include_n=True):
    m = X.shape[1]
    mult = np.ones(Z.shape[0]) if mult is None else mult
    pos = 0
    eta0 = np.full(Z.shape[0], -np.inf)
    etaN = np.full(Z.shape[0], -np.inf)
    if include_zero:
        eta0 = X @ params[pos : pos + m]
        pos += m
    if include_n:
        etaN = X @ params[pos : pos + m]
    mx = np.maximum(np.maximum(eta0, etaN), 0.0)
    z0 = np.where(np.isfinite(eta0), np.exp(eta0 - mx), 0.0)
    zN = np.where(np.isfinite(etaN), np.exp(etaN - mx), 0.0)
    denom = z0 + zN + np.exp(-mx)
    P0, PN = z0 / denom, zN / denom
    parts = []
    if include_zero:
        parts.append(X.T @ (mult * (Z[:, 0] - P0)))
    if include_n:
        parts.append(X.T @ (mult * (Z[:, 1] - PN)))
    return np.concatenate(parts)


def multinomial_logit_fit(
    Z, X, mult=None, include_zero=True, include_n=True, tol=1e-10, max_iter=200
):
    """Fit the soft-target softmax regression of responsibilities on X.

    Returns the stacked coefficient vector (beta for the zero class, then
    gamma for the N class, whichever are included).  Responsibilities act
    as fractional counts; rows must sum to 1.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if Z.shape[1] != 3:
        raise ValueError("responsibility matrix must have 3 columns")
    if np.any(Z < -1e-12) or np.any(np.abs(Z.sum(axis=1) - 1.0) > 1e-8):
        raise ValueError("responsibility rows must be nonnegative and sum to 1")
    if not (include_zero or include_n):
        raise ValueError("at least one inflation class must be included")
    m = X.shape[1]
    n_par = m * (int(include_zero) + int(include_n))
    params = np.zeros(n_par)
    mult = np.ones(Z.shape[0]) if mult is None else np.asarray(mult, dtype=float)

    def obj(v):
        return _multinomial_obj(v, Z, X, mult, include_zero, include_n)

    ll = obj(params)
    for _ in range(max_iter):
        g = multinomial_score(params, Z, X, mult, include_zero, include_n)
        if np.max(np.abs(g)) <= 1e-8:
            break
        H = _multinomial_hessian(params, Z, X, mult, include_zero, include_n)
        try:
            d = _solve_ascent(H, g, 1e-10)
        except np.linalg.LinAlgError:
            raise np.linalg.LinAlgError(
                "multinomial regression design is rank deficient"
            )
        step = 1.0
        for _ in range(40):
            cand = _clip_coef(params + step * d)
            ll_new = obj(cand)
            if np.isfinite(ll_new) and ll_new >= ll:
                break
            step /= 2.0
        improve = ll_new - ll
        no_move = np.allclose(cand, params)
        params, ll = cand, ll_new
        if no_move and improve <= 0:
            break
        if improve < tol and np.max(np.abs(params)) >= LOGIT_CLAMP:
            break
    return params


def _multinomial_obj(params, Z, X, mult, include_zero, include_n):
    m = X.shape[1]
    pos = 0
    eta0 = np.full(Z.shape[0], -np.inf)
    etaN = np.full(Z.shape[0], -np.inf)
    if include_zero:
        eta0 = X @ params[pos : pos + m]
        pos += m
    if include_n:
        etaN = X @ params[pos : pos + m]
    mx = np.maximum(np.maximum(eta0, etaN), 0.0)
    lse = mx + np.log(
        np.where(np.isfinite(eta0), np.exp(eta0 - mx), 0.0)
        + np.where(np.isfinite(etaN), np.exp(etaN - mx), 0.0)
        + np.exp(-mx)
    )
    total = -np.sum(mult * lse)
    if include_zero:
        total += np.sum(mult * Z[:, 0] * eta0)
    if include_n:
        total += np.sum(mult * Z[:, 1] * etaN)
    return float(total)


def _multinomial_hessian(params, Z, X, mult, include_zero, include_n):
    m = X.shape[1]
    pos = 0
    eta0 = np.full(Z.shape[0], -np.inf)
    etaN = np.full(Z.shape[0], -np.inf)
    if include_zero:
        eta0 = X @ params[pos : pos + m]
        pos += m
    if include_n:
        etaN = X @ params[pos : pos + m]
    mx = np.maximum(np.maximum(eta0, etaN), 0.0)
    z0 = np.where(np.isfinite(eta0), np.exp(eta0 - mx), 0.0)
    zN = np.where(np.isfinite(etaN), np.exp(etaN - mx), 0.0)
    denom = z0 + zN + np.exp(-mx)
    P0, PN = z0 / denom, zN / denom
    blocks = []
    if include_zero and include_n:
        H00 = -(X.T * (mult * P0 * (1.0 - P0))) @ X
        HNN = -(X.T * (mult * PN * (1.0 - PN))) @ X
        H0N = (X.T * (mult * P0 * PN)) @ X
        return np.block([[H00, H0N], [H0N.T, HNN]])
    P = P0 if include_zero else PN
    return -(X.T * (mult * P * (1.0 - P))) @ X
