"""Data containers, link regimes, and model-family specifications.

A ``ModelSpec`` couples a family (binomial, ZIB, NIB, ZNIB, beta-binomial,
ZNIBB) with a link for the success probability and a link regime for the
inflation weights.  ``evaluate_links`` turns a packed parameter vector into
per-observation (p_i, q0_i, qN_i); the softmax construction keeps
q0 + qN < 1 for every finite parameter vector, so every optimizer iterate
yields a well-defined pmf.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import expit

from .distributions import LOGIT_CLAMP

__all__ = [
    "DataError",
    "Dataset",
    "Family",
    "ConstantLogit",
    "LogitLinear",
    "BetaBinShapes",
    "ConstantHurdle",
    "SoftmaxCovariate",
    "PowerLink",
    "NoInflation",
    "ModelSpec",
    "evaluate_links",
    "param_names",
    "pack",
    "unpack",
    "load_csv",
]


class DataError(ValueError):
    """Raised for malformed or constraint-violating input data."""


@dataclass(frozen=True)
class Dataset:
    """Observations (y_i, N_i), design matrix, optional multiplicities.

    ``mult`` carries count-of-counts weights for grouped data (all rows
    share one N); it defaults to all-ones for individual observations.
    """

    y: np.ndarray
    n: np.ndarray
    X: np.ndarray
    columns: tuple
    mult: np.ndarray = None
    grouped: bool = False

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.int64)
        n = np.asarray(self.n, dtype=np.int64)
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if y.size == 0:
            raise DataError("dataset is empty")
        if n.shape != y.shape:
            raise DataError("y and n must have the same length")
        if X.shape[0] != y.size:
            raise DataError(
                f"design matrix has {X.shape[0]} rows but y has {y.size}"
            )
        if len(self.columns) != X.shape[1]:
            raise DataError("column names must match design width")
        bad = np.flatnonzero((y < 0) | (y > n))
        if bad.size:
            raise DataError(f"rows {bad.tolist()} violate 0 <= y <= n")
        mult = self.mult
        if mult is None:
            mult = np.ones(y.size)
        else:
            mult = np.asarray(mult, dtype=float)
            if mult.shape != y.shape:
                raise DataError("multiplicities must match y length")
            if np.any(mult < 1):
                raise DataError("multiplicities must be >= 1")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "mult", mult)

    @property
    def n_obs(self):
        return self.y.size

    @property
    def total_count(self):
        return float(self.mult.sum())

    def column(self, name):
        try:
            j = self.columns.index(name)
        except ValueError:
            raise DataError(f"no column named {name!r}") from None
        return self.X[:, j]


class Family(enum.Enum):
    BINOMIAL = "binomial"
    ZIB = "zib"
    NIB = "nib"
    ZNIB = "znib"
    BETA_BINOMIAL = "betabin"
    ZNIBB = "znibb"


BETA_BIN_FAMILIES = (Family.BETA_BINOMIAL, Family.ZNIBB)
INFLATED_FAMILIES = (Family.ZIB, Family.NIB, Family.ZNIB, Family.ZNIBB)


# --- success links -----------------------------------------------------------


@dataclass(frozen=True)
class ConstantLogit:
    """Single logit shared by all rows: p = expit(theta)."""


@dataclass(frozen=True)
class LogitLinear:
    """logit(p_i) = coef . X_i over the named design columns."""

    columns: tuple

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))


@dataclass(frozen=True)
class BetaBinShapes:
    """Beta-binomial shape pair (r1, r2), stored as logs when packed."""


# --- inflation link regimes --------------------------------------------------


@dataclass(frozen=True)
class ConstantHurdle:
    """Scalar inflation logits (theta0, thetaN) for all rows."""


@dataclass(frozen=True)
class SoftmaxCovariate:
    """(q0, qN, rest) = softmax(beta.X, gamma.X, 0) over named columns."""

    columns: tuple

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))


@dataclass(frozen=True)
class PowerLink:
    """q0 proportional to p^alpha0, qN to (1-p)^alphaN; alphas stored as logs."""


@dataclass(frozen=True)
class NoInflation:
    """q0 = qN = 0 (plain binomial / beta-binomial)."""


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    success: object = field(default_factory=ConstantLogit)
    inflation: object = field(default_factory=NoInflation)

    def __post_init__(self):
        if self.family in BETA_BIN_FAMILIES:
            if not isinstance(self.success, BetaBinShapes):
                object.__setattr__(self, "success", BetaBinShapes())
            if isinstance(self.inflation, PowerLink):
                # A non-constant per-trial success probability breaks the
                # power-law tie between p and the inflation weights.
                raise ValueError("power link is invalid with beta-binomial families")
        if self.family in (Family.BINOMIAL, Family.BETA_BINOMIAL):
            if not isinstance(self.inflation, NoInflation):
                raise ValueError(f"{self.family.value} admits no inflation link")
        elif isinstance(self.inflation, NoInflation):
            raise ValueError(f"{self.family.value} requires an inflation link")

    @property
    def zero_inflated(self):
        return self.family in (Family.ZIB, Family.ZNIB, Family.ZNIBB)

    @property
    def n_inflated(self):
        return self.family in (Family.NIB, Family.ZNIB, Family.ZNIBB)


def _success_names(spec):
    s = spec.success
    if isinstance(s, ConstantLogit):
        return ["logit_p"]
    if isinstance(s, LogitLinear):
        return [f"beta[{c}]" for c in s.columns]
    if isinstance(s, BetaBinShapes):
        return ["log_r1", "log_r2"]
    raise ValueError(f"unknown success link {s!r}")


def _inflation_names(spec):
    infl = spec.inflation
    if isinstance(infl, NoInflation):
        return []
    if isinstance(infl, ConstantHurdle):
        names = []
        if spec.zero_inflated:
            names.append("theta0")
        if spec.n_inflated:
            names.append("thetaN")
        return names
    if isinstance(infl, SoftmaxCovariate):
        names = []
        if spec.zero_inflated:
            names += [f"infl0[{c}]" for c in infl.columns]
        if spec.n_inflated:
            names += [f"inflN[{c}]" for c in infl.columns]
        return names
    if isinstance(infl, PowerLink):
        names = []
        if spec.zero_inflated:
            names.append("log_alpha0")
        if spec.n_inflated:
            names.append("log_alphaN")
        return names
    raise ValueError(f"unknown inflation link {infl!r}")


def param_names(spec: ModelSpec):
    """Packing order: success parameters first, then inflation parameters."""
    return _success_names(spec) + _inflation_names(spec)


def pack(spec: ModelSpec, values: dict) -> np.ndarray:
    names = param_names(spec)
    unknown = set(values) - set(names)
    if unknown:
        raise ValueError(f"unknown parameter names: {sorted(unknown)}")
    missing = set(names) - set(values)
    if missing:
        raise ValueError(f"missing parameter values: {sorted(missing)}")
    return np.array([float(values[name]) for name in names])


def unpack(spec: ModelSpec, vector) -> dict:
    names = param_names(spec)
    vector = np.asarray(vector, dtype=float)
    if vector.size != len(names):
        raise ValueError(
            f"parameter vector has {vector.size} entries, spec needs {len(names)}"
        )
    return dict(zip(names, vector.tolist()))


def _design(data: Dataset, columns):
    cols = []
    for c in columns:
        cols.append(data.column(c))
    return np.column_stack(cols)


def _softmax_weights(eta0, etaN):
    """Row-wise (q0, qN) from logits with a zero reference; clamped."""
    eta0 = np.clip(eta0, -LOGIT_CLAMP, LOGIT_CLAMP)
    etaN = np.clip(etaN, -LOGIT_CLAMP, LOGIT_CLAMP)
    m = np.maximum(np.maximum(eta0, etaN), 0.0)
    z0 = np.exp(eta0 - m)
    zN = np.exp(etaN - m)
    zr = np.exp(-m)
    denom = z0 + zN + zr
    return z0 / denom, zN / denom


def evaluate_links(spec: ModelSpec, packed, data: Dataset):
    """Per-row (p_i, q0_i, qN_i) for a packed parameter vector.

    For beta-binomial families the returned p_i is the mean proportion
    r1 / (r1 + r2).
    """
    packed = np.asarray(packed, dtype=float)
    names = param_names(spec)
    if packed.size != len(names):
        raise ValueError(
            f"parameter vector has {packed.size} entries, spec needs {len(names)}"
        )
    n = data.n_obs
    s = spec.success
    if isinstance(s, ConstantLogit):
        p = np.full(n, expit(packed[0]))
        pos = 1
    elif isinstance(s, LogitLinear):
        w = len(s.columns)
        p = expit(_design(data, s.columns) @ packed[:w])
        pos = w
    else:  # BetaBinShapes
        r1, r2 = np.exp(packed[0]), np.exp(packed[1])
        p = np.full(n, r1 / (r1 + r2))
        pos = 2

    infl = spec.inflation
    if isinstance(infl, NoInflation):
        return p, np.zeros(n), np.zeros(n)
    if isinstance(infl, ConstantHurdle):
        theta0 = packed[pos] if spec.zero_inflated else -np.inf
        pos += 1 if spec.zero_inflated else 0
        thetaN = packed[pos] if spec.n_inflated else -np.inf
        q0, qN = _softmax_weights(np.full(n, theta0), np.full(n, thetaN))
        return p, q0, qN
    if isinstance(infl, SoftmaxCovariate):
        Xi = _design(data, infl.columns)
        w = Xi.shape[1]
        if spec.zero_inflated:
            eta0 = Xi @ packed[pos : pos + w]
            pos += w
        else:
            eta0 = np.full(n, -np.inf)
        if spec.n_inflated:
            etaN = Xi @ packed[pos : pos + w]
        else:
            etaN = np.full(n, -np.inf)
        q0, qN = _softmax_weights(eta0, etaN)
        return p, q0, qN
    if isinstance(infl, PowerLink):
        log_p = np.log(np.clip(p, 1e-300, 1.0))
        log_1mp = np.log(np.clip(1.0 - p, 1e-300, 1.0))
        eta0 = np.full(n, -np.inf)
        etaN = np.full(n, -np.inf)
        if spec.zero_inflated:
            eta0 = np.exp(packed[pos]) * log_p
            pos += 1
        if spec.n_inflated:
            etaN = np.exp(packed[pos]) * log_1mp
        # theta = alpha * log p is <= 0, so no upper clamp is ever active
        q0, qN = _softmax_weights(eta0, etaN)
        return p, q0, qN
    raise ValueError(f"unknown inflation link {infl!r}")


def load_csv(
    path,
    y_col,
    n_col=None,
    n_value=None,
    mult_col=None,
    covariates=(),
    intercept=True,
    standardize=False,
):
    """Load a Dataset from a CSV file.

    Exactly one of ``n_col`` / ``n_value`` gives the per-row sum constraint.
    Declaring ``mult_col`` switches to grouped (count-of-counts) form.
    ``intercept`` prepends a constant column named "const";
    ``standardize`` rescales each covariate to mean 0, sd 1.
    """
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise DataError(f"{path}: file is empty") from None
    except pd.errors.ParserError as exc:
        raise DataError(f"{path}: parse failure: {exc}") from None
    if frame.empty:
        raise DataError(f"{path}: no data rows")
    needed = [y_col] + ([n_col] if n_col else []) + ([mult_col] if mult_col else [])
    needed += list(covariates)
    for c in needed:
        if c not in frame.columns:
            raise DataError(f"{path}: missing column {c!r}")
    y = frame[y_col].to_numpy()
    if n_col is not None:
        n = frame[n_col].to_numpy()
    elif n_value is not None:
        n = np.full(y.shape, int(n_value))
    else:
        raise DataError("one of n_col or n_value is required")
    bad = np.flatnonzero((y < 0) | (y > n))
    if bad.size:
        raise DataError(f"{path}: rows {bad.tolist()} violate 0 <= y <= n")
    cols = []
    names = []
    if intercept:
        cols.append(np.ones(len(frame)))
        names.append("const")
    for c in covariates:
        v = frame[c].to_numpy(dtype=float)
        if standardize:
            sd = v.std(ddof=0)
            if sd == 0:
                raise DataError(f"{path}: covariate {c!r} is constant; cannot standardize")
            v = (v - v.mean()) / sd
        cols.append(v)
        names.append(c)
    X = np.column_stack(cols) if cols else np.ones((len(frame), 1))
    if not cols:
        names = ["const"]
    mult = frame[mult_col].to_numpy(dtype=float) if mult_col else None
    return Dataset(
        y=y, n=n, X=X, columns=tuple(names), mult=mult, grouped=mult_col is not None
    )
