"""Post-fit quantities: observed-information standard errors, AIC
comparison tables, and parametric-bootstrap uncertainty bands."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import BetaBinParams, ZnibbParams, sample
from .model import BetaBinShapes, Dataset, evaluate_links
from .optim import central_diff_hessian

__all__ = [
    "aic",
    "observed_info_se",
    "observed_info_se_from_objective",
    "ComparisonTable",
    "compare",
    "BootstrapBands",
    "bootstrap_bands",
    "predicted_proportion",
]


def aic(loglik, n_params) -> float:
    """Akaike information criterion 2k - 2*loglik."""
    if n_params < 0:
        raise ValueError("n_params must be nonnegative")
    return 2.0 * n_params - 2.0 * float(loglik)


def observed_info_se_from_objective(objective, estimates):
    """Standard errors from the inverse observed information matrix.

    The observed information is the negative central-difference Hessian of
    the log-likelihood at the estimate.  Directions of non-positive
    curvature yield flagged entries (NaN SE) instead of failure.
    """
    estimates = np.asarray(estimates, dtype=float)
    m = estimates.size
    flags = np.zeros(m, dtype=bool)
    try:
        H = central_diff_hessian(objective, estimates)
    except FloatingPointError:
        return np.full(m, np.nan), np.ones(m, dtype=bool)
    info = -H
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        ridge = 1e-10 * (1.0 + np.abs(np.diag(info)))
        while True:
            try:
                cov = np.linalg.inv(info + np.diag(ridge))
                break
            except np.linalg.LinAlgError:
                ridge *= 10.0
                if np.max(ridge) > 1e-2 * (1.0 + np.max(np.abs(np.diag(info)))):
                    return np.full(m, np.nan), np.ones(m, dtype=bool)
        flags[:] = True
    diag = np.diag(cov).copy()
    bad = ~(diag > 0)
    flags |= bad
    se = np.sqrt(np.where(bad, np.nan, diag))
    return se, flags


def observed_info_se(fit, objective=None):
    """Standard-error vector for a FitResult (recomputed if an explicit
    objective is given)."""
    if objective is None:
        return fit.std_errors
    se, _ = observed_info_se_from_objective(objective, fit.estimates)
    return se


@dataclass
class ComparisonTable:
    labels: list
    fits: list
    aics: np.ndarray
    delta_aic: np.ndarray
    order: np.ndarray  # indices sorted by AIC ascending, input order on ties

    def rows(self):
        for idx in self.order:
            yield self.labels[idx], self.fits[idx], self.aics[idx], self.delta_aic[idx]


def compare(fits, labels=None) -> ComparisonTable:
    """AIC comparison of fits on one dataset, sorted ascending."""
    fits = list(fits)
    if not fits:
        raise ValueError("no fits to compare")
    base = fits[0].data
    for f in fits[1:]:
        if f.data is not base:
            same = (
                f.data is not None
                and base is not None
                and np.array_equal(f.data.y, base.y)
                and np.array_equal(f.data.n, base.n)
                and np.array_equal(f.data.mult, base.mult)
            )
            if not same:
                raise ValueError("fits were produced on different datasets")
    if labels is None:
        labels = [f.spec.family.value for f in fits]
    aics = np.array([f.aic for f in fits])
    order = np.argsort(aics, kind="stable")
    delta = aics - aics.min()
    return ComparisonTable(
        labels=list(labels), fits=fits, aics=aics, delta_aic=delta, order=order
    )


@dataclass
class BootstrapBands:
    grid: np.ndarray
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    replicates: int
    seed: int
    n_failed: int
    unreliable: bool


def predicted_proportion(fit, grid, column=None):
    """E[y/N | x] along a covariate grid, other covariates at their means.

    Equals qN + (1 - q0 - qN) * p, the mixture mean divided by N.
    """
    data = fit.data
    grid = np.asarray(grid, dtype=float)
    X = np.tile(data.X.mean(axis=0), (grid.size, 1))
    if column is not None:
        j = data.columns.index(column)
        X[:, j] = grid
    probe = Dataset(
        y=np.zeros(grid.size, dtype=int),
        n=np.ones(grid.size, dtype=int),
        X=X,
        columns=data.columns,
    )
    p, q0, qN = evaluate_links(fit.spec, fit.estimates, probe)
    return qN + (1.0 - q0 - qN) * p


def _simulate_dataset(fit, rng):
    data = fit.data
    if data.grouped:
        raise ValueError("parametric bootstrap is not defined for grouped data")
    p, q0, qN = evaluate_links(fit.spec, fit.estimates, data)
    if isinstance(fit.spec.success, BetaBinShapes):
        r1, r2 = np.exp(fit.estimates[0]), np.exp(fit.estimates[1])
        y = np.empty(data.n_obs, dtype=np.int64)
        for i in range(data.n_obs):
            law = ZnibbParams(
                base=BetaBinParams(int(data.n[i]), r1, r2), q0=q0[i], qN=qN[i]
            )
            y[i] = sample(law, 1, rng=rng)[0]
    else:
        u = rng.random(data.n_obs)
        body = rng.binomial(data.n, p)
        y = np.where(u < q0, 0, np.where(u < q0 + qN, data.n, body)).astype(np.int64)
    return Dataset(
        y=y, n=data.n, X=data.X, columns=data.columns, mult=None, grouped=False
    )


def bootstrap_bands(
    fit, B=200, seed=0, column=None, grid=None, grid_size=100, level=0.95
) -> BootstrapBands:
    """Parametric-bootstrap pointwise bands for the predicted proportion.

    Simulates B datasets from the fitted law at the observed (N_i, X_i),
    refits each with the original spec, and takes empirical quantiles of
    the replicate prediction curves.  Per-replicate generator streams are
    derived from (seed, replicate index), so results do not depend on
    execution order.  Replicates whose refit fails are dropped and counted;
    losing more than 20% flags the bands unreliable.
    """
    from .fit import fit_model

    if B < 2:
        raise ValueError("B must be at least 2")
    if not fit.converged:
        raise ValueError("bootstrap requires a converged fit")
    data = fit.data
    if column is None:
        non_const = [c for c in data.columns if c != "const"]
        column = non_const[0] if non_const else None
    if grid is None:
        if column is None:
            grid = np.zeros(1)
        else:
            v = data.column(column)
            grid = np.linspace(v.min(), v.max(), grid_size)
    grid = np.asarray(grid, dtype=float)
    point = predicted_proportion(fit, grid, column)
    curves = []
    n_failed = 0
    for b in range(B):
        rng = np.random.default_rng([int(seed), b])
        sim = _simulate_dataset(fit, rng)
        try:
            refit = fit_model(sim, fit.spec)
        except (RuntimeError, ValueError, np.linalg.LinAlgError):
            n_failed += 1
            continue
        if not refit.converged:
            n_failed += 1
            continue
        curves.append(predicted_proportion(refit, grid, column))
    if len(curves) < 2:
        raise RuntimeError(f"too few successful bootstrap replicates ({len(curves)})")
    curves = np.asarray(curves)
    alpha = (1.0 - level) / 2.0
    lower = np.quantile(curves, alpha, axis=0)
    upper = np.quantile(curves, 1.0 - alpha, axis=0)
    return BootstrapBands(
        grid=grid,
        point=point,
        lower=lower,
        upper=upper,
        replicates=len(curves),
        seed=int(seed),
        n_failed=n_failed,
        unreliable=n_failed > 0.2 * B,
    )
