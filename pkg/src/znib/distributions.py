"""Zero & N-inflated binomial (ZNIB) family: exact pmfs, moments, sampling.

The ZNIB law is a three-component mixture: a point mass at 0 with weight
``q0``, a point mass at ``n_trials`` with weight ``qN``, and a
binomial(n_trials, p) body with the remaining weight.  It arises as the
conditional law of one zero-inflated Poisson count given the sum of two
independent ones (``zip_condition``).  Replacing the Poissons with
negative binomials sharing a success probability yields the beta-binomial
analogue (ZNIBB), and conditioning k processes yields the multinomial
analogue (ZNIM).

All pmfs are evaluated in log space through ``gammaln`` so that large
trial counts (pollen-scale, thousands) do not overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp, xlog1py, xlogy

__all__ = [
    "LOGIT_CLAMP",
    "ZnibParams",
    "InflationLogits",
    "ZipPair",
    "BetaBinParams",
    "ZnibbParams",
    "ZnimParams",
    "znib_pmf",
    "znib_log_pmf",
    "znib_pmf_vector",
    "znib_moments",
    "znib_central_moment",
    "logits_to_weights",
    "zip_condition",
    "conditional_oracle",
    "betabin_log_pmf",
    "betabin_pmf",
    "znibb_pmf",
    "znibb_pmf_vector",
    "znim_pmf",
    "znim_mixture_pmf",
    "sample",
    "reflect",
]

# Beyond |logit| = 35 the softmax weights are 0/1 in double precision;
# boundary MLEs push logits there.
LOGIT_CLAMP = 35.0


def _check_prob(value, name):
    if not np.isfinite(value) or value < 0.0 or value > 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class ZnibParams:
    """One ZNIB law: trial count, success probability, inflation weights."""

    n_trials: int
    p: float
    q0: float = 0.0
    qN: float = 0.0

    def __post_init__(self):
        if self.n_trials < 0 or int(self.n_trials) != self.n_trials:
            raise ValueError(f"n_trials must be a nonnegative integer, got {self.n_trials!r}")
        _check_prob(self.p, "p")
        _check_prob(self.q0, "q0")
        _check_prob(self.qN, "qN")
        if self.q0 + self.qN > 1.0 + 1e-12:
            raise ValueError(f"q0 + qN must not exceed 1, got {self.q0 + self.qN}")


@dataclass(frozen=True)
class InflationLogits:
    """Unconstrained reparameterisation (theta0, thetaN) of (q0, qN)."""

    theta0: float
    thetaN: float

    def __post_init__(self):
        if not (np.isfinite(self.theta0) and np.isfinite(self.thetaN)):
            raise ValueError("inflation logits must be finite")


@dataclass(frozen=True)
class ZipPair:
    """Two independent zero-inflated Poisson processes.

    ``q1``/``q2`` are the probabilities that each process is Poisson
    rather than a structural zero.
    """

    mu1: float
    q1: float
    mu2: float
    q2: float

    def __post_init__(self):
        if not (self.mu1 > 0 and self.mu2 > 0):
            raise ValueError("rates mu1, mu2 must be positive")
        for q, name in ((self.q1, "q1"), (self.q2, "q2")):
            if not (0.0 < q <= 1.0):
                raise ValueError(f"{name} must lie in (0, 1], got {q!r}")


@dataclass(frozen=True)
class BetaBinParams:
    """Beta-binomial law with shape parameters r1, r2."""

    n_trials: int
    r1: float
    r2: float

    def __post_init__(self):
        if self.n_trials < 0 or int(self.n_trials) != self.n_trials:
            raise ValueError(f"n_trials must be a nonnegative integer, got {self.n_trials!r}")
        if not (self.r1 > 0 and self.r2 > 0):
            raise ValueError("shape parameters r1, r2 must be positive")


@dataclass(frozen=True)
class ZnibbParams:
    """Zero & N-inflated beta-binomial law."""

    base: BetaBinParams
    q0: float = 0.0
    qN: float = 0.0

    def __post_init__(self):
        _check_prob(self.q0, "q0")
        _check_prob(self.qN, "qN")
        if self.q0 + self.qN > 1.0 + 1e-12:
            raise ValueError(f"q0 + qN must not exceed 1, got {self.q0 + self.qN}")

    @property
    def n_trials(self):
        return self.base.n_trials


@dataclass(frozen=True)
class ZnimParams:
    """Zero & N-inflated multinomial law with per-category inflation weights."""

    n_trials: int
    p: tuple
    q0: tuple
    qN: tuple

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        q0 = np.asarray(self.q0, dtype=float)
        qN = np.asarray(self.qN, dtype=float)
        k = p.size
        if k < 2:
            raise ValueError("category count must be at least 2")
        if q0.size != k or qN.size != k:
            raise ValueError("p, q0, qN must have equal length")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("p must be a probability vector summing to 1")
        if np.any(q0 < 0) or np.any(qN < 0):
            raise ValueError("inflation weights must be nonnegative")
        if q0.sum() + qN.sum() > 1.0 + 1e-12:
            raise ValueError("total inflation weight must not exceed 1")
        if self.n_trials < 0 or int(self.n_trials) != self.n_trials:
            raise ValueError(f"n_trials must be a nonnegative integer, got {self.n_trials!r}")
        object.__setattr__(self, "p", tuple(p))
        object.__setattr__(self, "q0", tuple(q0))
        object.__setattr__(self, "qN", tuple(qN))

    @property
    def n_categories(self):
        return len(self.p)


def _binom_log_pmf(k, n, p):
    """Binomial log pmf, safe at p in {0, 1} and n = 0."""
    k = np.asarray(k, dtype=float)
    return (
        gammaln(n + 1.0)
        - gammaln(k + 1.0)
        - gammaln(n - k + 1.0)
        + xlogy(k, p)
        + xlog1py(n - k, -p)
    )


def znib_log_pmf(k, params: ZnibParams) -> float:
    """Log of the ZNIB pmf at ``k``."""
    n = params.n_trials
    k = int(k)
    if k < 0 or k > n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    body = 1.0 - params.q0 - params.qN
    terms = []
    if k == 0 and params.q0 > 0:
        terms.append(np.log(params.q0))
    if k == n and params.qN > 0:
        terms.append(np.log(params.qN))
    if body > 0:
        terms.append(np.log(body) + _binom_log_pmf(k, n, params.p))
    if not terms:
        return -np.inf
    return float(logsumexp(terms))


def znib_pmf(k, params: ZnibParams) -> float:
    """ZNIB pmf at ``k``: q0*1[k=0] + qN*1[k=N] + (1-q0-qN)*bin(N,p)."""
    return float(np.exp(znib_log_pmf(k, params)))


def znib_pmf_vector(params: ZnibParams) -> np.ndarray:
    """Full pmf over the support 0..n_trials."""
    n = params.n_trials
    k = np.arange(n + 1)
    body = 1.0 - params.q0 - params.qN
    pmf = body * np.exp(_binom_log_pmf(k, n, params.p))
    pmf[0] += params.q0
    pmf[n] += params.qN
    return pmf


def znib_moments(params: ZnibParams):
    """Mean and variance of the ZNIB law."""
    n, p, q0, qN = params.n_trials, params.p, params.q0, params.qN
    body = 1.0 - q0 - qN
    mean = qN * n + body * n * p
    var = qN * n**2 + body * (n * p) * (1.0 - p + n * p) - mean**2
    return mean, var


def _binomial_central_moments(j, n, p):
    """Central moments m^(0..j) of binomial(n, p).

    Summed directly over the body support with compensated (fsum)
    accumulation; the raw-to-central binomial transform loses several
    digits to cancellation once (np)^j is large, this route does not.
    """
    from math import fsum

    from scipy.stats import binom as _binom

    k = np.arange(n + 1)
    pmf = _binom.pmf(k, n, p)
    dev = k - n * p
    central = np.zeros(j + 1)
    central[0] = 1.0
    for r in range(1, j + 1):
        central[r] = fsum(pmf * dev**r)
    return central


def znib_central_moment(j, params: ZnibParams) -> float:
    """j-th central moment E[(X - mu)^j] of the ZNIB law.

    Combines the point-mass contributions analytically with the binomial
    body's central moments.
    """
    if j < 1 or int(j) != j:
        raise ValueError(f"moment order must be a positive integer, got {j!r}")
    j = int(j)
    n, p, q0, qN = params.n_trials, params.p, params.q0, params.qN
    body = 1.0 - q0 - qN
    mean, _ = znib_moments(params)
    m = _binomial_central_moments(j, n, p)
    from math import comb

    shift = n * p - mean
    body_term = sum(comb(j, k) * shift ** (j - k) * m[k] for k in range(j + 1))
    return q0 * (-mean) ** j + qN * (n - mean) ** j + body * body_term


def logits_to_weights(logits: InflationLogits):
    """Map (theta0, thetaN) to (q0, qN) through the 3-way softmax with a
    zero reference logit; stable for clamped magnitudes."""
    t0 = float(np.clip(logits.theta0, -LOGIT_CLAMP, LOGIT_CLAMP))
    tN = float(np.clip(logits.thetaN, -LOGIT_CLAMP, LOGIT_CLAMP))
    m = max(t0, tN, 0.0)
    z0 = np.exp(t0 - m)
    zN = np.exp(tN - m)
    zr = np.exp(-m)
    denom = z0 + zN + zr
    return z0 / denom, zN / denom


def zip_condition(pair: ZipPair, n) -> ZnibParams:
    """ZNIB law of Y1 given Y1 + Y2 = n for a pair of ZIP processes.

    Implements the closed-form inflation weights of the conditioning
    construction; ``p = mu1 / (mu1 + mu2)``.
    """
    if n < 0 or int(n) != n:
        raise ValueError(f"n must be a nonnegative integer, got {n!r}")
    n = int(n)
    total = pair.mu1 + pair.mu2
    if total <= 0:
        raise ValueError("mu1 + mu2 must be positive")
    p = pair.mu1 / total
    if n == 0:
        # The decomposition is defined only for n > 0; the conditional law
        # at n = 0 is the point mass at 0.
        return ZnibParams(n_trials=0, p=p, q0=0.0, qN=0.0)
    # log of A = ((1-q1)/q1) e^{mu1} (1-p)^n and B = ((1-q2)/q2) e^{mu2} p^n
    with np.errstate(divide="ignore"):
        log_a = np.log1p(-pair.q1) - np.log(pair.q1) + pair.mu1 + xlog1py(n, -p)
        log_b = np.log1p(-pair.q2) - np.log(pair.q2) + pair.mu2 + xlogy(n, p)
    log_denom = logsumexp([log_a, log_b, 0.0])
    q0 = float(np.exp(log_a - log_denom))
    qN = float(np.exp(log_b - log_denom))
    return ZnibParams(n_trials=n, p=p, q0=q0, qN=qN)


def _zip_log_pmf(k, mu, q):
    """Log pmf of a single ZIP(mu, q) process (q = probability of the
    Poisson branch)."""
    k = np.asarray(k, dtype=float)
    log_pois = xlogy(k, mu) - mu - gammaln(k + 1.0)
    out = np.log(q) + log_pois
    if q < 1.0:
        zero = k == 0
        out = np.where(
            zero, np.logaddexp(np.log1p(-q), out), out
        )
    return out


def conditional_oracle(pair: ZipPair, n) -> np.ndarray:
    """pr(Y1 = k | Y1 + Y2 = n) by direct enumeration of the joint ZIP pmf.

    Independent check on ``zip_condition``: no closed forms, just the
    normalized joint mass along the anti-diagonal.
    """
    if n < 0 or int(n) != n:
        raise ValueError(f"n must be a nonnegative integer, got {n!r}")
    n = int(n)
    k = np.arange(n + 1)
    log_joint = _zip_log_pmf(k, pair.mu1, pair.q1) + _zip_log_pmf(n - k, pair.mu2, pair.q2)
    log_total = logsumexp(log_joint)
    if not np.isfinite(log_total):
        raise ValueError("joint mass is zero along the constraint; degenerate input")
    return np.exp(log_joint - log_total)


def betabin_log_pmf(k, params: BetaBinParams) -> float:
    """Beta-binomial log pmf via log-gamma."""
    n, r1, r2 = params.n_trials, params.r1, params.r2
    k = int(k)
    if k < 0 or k > n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    if n == 0:
        return 0.0
    return float(
        gammaln(n + 1.0)
        - gammaln(k + 1.0)
        - gammaln(n - k + 1.0)
        + gammaln(k + r1)
        + gammaln(n - k + r2)
        - gammaln(n + r1 + r2)
        + gammaln(r1 + r2)
        - gammaln(r1)
        - gammaln(r2)
    )


def betabin_pmf(k, params: BetaBinParams) -> float:
    return float(np.exp(betabin_log_pmf(k, params)))


def znibb_pmf(k, params: ZnibbParams) -> float:
    """ZNIBB pmf: q0*1[k=0] + qN*1[k=N] + (1-q0-qN)*beta-binomial(k)."""
    n = params.n_trials
    k = int(k)
    if k < 0 or k > n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    body = 1.0 - params.q0 - params.qN
    value = body * betabin_pmf(k, params.base)
    if k == 0:
        value += params.q0
    if k == n:
        value += params.qN
    return value


def znibb_pmf_vector(params: ZnibbParams) -> np.ndarray:
    n = params.n_trials
    return np.array([znibb_pmf(k, params) for k in range(n + 1)])


def _multinomial_log_pmf(y, p):
    """Multinomial log pmf; categories with p=0 demand y=0 there."""
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any((p == 0) & (y > 0)):
        return -np.inf
    n = y.sum()
    return float(gammaln(n + 1.0) - gammaln(y + 1.0).sum() + xlogy(y, p).sum())


def znim_pmf(y, params: ZnimParams) -> float:
    """Zero & N-inflated multinomial pmf.

    Mixture of the plain multinomial body, one degenerate component per
    N-inflated category, and one rescaled component per zero-inflated
    category.  Arbitrary component sets go through ``znim_mixture_pmf``.
    """
    y = np.asarray(y, dtype=int)
    k = params.n_categories
    n = params.n_trials
    if y.size != k:
        raise ValueError(f"y must have {k} entries, got {y.size}")
    if np.any(y < 0) or y.sum() != n:
        raise ValueError(f"entries of y must be nonnegative and sum to {n}")
    p = np.asarray(params.p)
    q0 = np.asarray(params.q0)
    qN = np.asarray(params.qN)
    body_weight = 1.0 - q0.sum() - qN.sum()
    total = body_weight * np.exp(_multinomial_log_pmf(y, p))
    for j in range(k):
        if qN[j] > 0:
            degenerate = np.zeros(k)
            degenerate[j] = 1.0
            total += qN[j] * np.exp(_multinomial_log_pmf(y, degenerate))
        if q0[j] > 0:
            rest = p.copy()
            rest[j] = 0.0
            norm = rest.sum()
            if norm <= 0:
                raise ValueError(
                    f"cannot rescale after zeroing category {j}: remaining mass is 0"
                )
            total += q0[j] * np.exp(_multinomial_log_pmf(y, rest / norm))
    return float(total)


def znim_mixture_pmf(y, n_trials, weights, prob_vectors) -> float:
    """General mixture-of-multinomials pmf from explicit component lists.

    Supports simultaneous multi-category inflation: the caller supplies the
    (possibly degenerate, already rescaled) probability vector of each
    component together with its weight.
    """
    y = np.asarray(y, dtype=int)
    if y.sum() != n_trials:
        raise ValueError(f"entries of y must sum to {n_trials}")
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-10:
        raise ValueError("component weights must be nonnegative and sum to 1")
    total = 0.0
    for w, pv in zip(weights, prob_vectors):
        if w > 0:
            total += w * np.exp(_multinomial_log_pmf(y, pv))
    return float(total)


def reflect(params: ZnibParams) -> ZnibParams:
    """Law of N - Y: success probability flipped, inflation weights swapped."""
    return ZnibParams(
        n_trials=params.n_trials, p=1.0 - params.p, q0=params.qN, qN=params.q0
    )


def sample(params, count, seed=None, rng=None):
    """Reproducible draws from any of the implemented laws.

    ZNIB/ZNIBB use inverse-cdf over the finite support; a ZIP pair composes
    Bernoulli gates with Poisson draws (returns an array of (y1, y2) rows);
    ZNIM picks a mixture component then draws the multinomial.
    """
    if count < 0:
        raise ValueError(f"count must be nonnegative, got {count!r}")
    if rng is None:
        rng = np.random.default_rng(seed)
    if isinstance(params, ZnibParams):
        return _sample_support(znib_pmf_vector(params), count, rng)
    if isinstance(params, ZnibbParams):
        return _sample_support(znibb_pmf_vector(params), count, rng)
    if isinstance(params, ZipPair):
        y1 = rng.poisson(params.mu1, size=count) * (rng.random(count) < params.q1)
        y2 = rng.poisson(params.mu2, size=count) * (rng.random(count) < params.q2)
        return np.column_stack([y1, y2])
    if isinstance(params, ZnimParams):
        return _sample_znim(params, count, rng)
    raise ValueError(f"cannot sample from {type(params).__name__}")


def _sample_support(pmf, count, rng):
    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(count), side="right").astype(np.int64)


def _sample_znim(params: ZnimParams, count, rng):
    k = params.n_categories
    n = params.n_trials
    p = np.asarray(params.p)
    q0 = np.asarray(params.q0)
    qN = np.asarray(params.qN)
    weights = [1.0 - q0.sum() - qN.sum()]
    vectors = [p]
    for j in range(k):
        if qN[j] > 0:
            degenerate = np.zeros(k)
            degenerate[j] = 1.0
            weights.append(qN[j])
            vectors.append(degenerate)
        if q0[j] > 0:
            rest = p.copy()
            rest[j] = 0.0
            if rest.sum() <= 0:
                raise ValueError(
                    f"cannot rescale after zeroing category {j}: remaining mass is 0"
                )
            weights.append(q0[j])
            vectors.append(rest / rest.sum())
    weights = np.asarray(weights)
    weights = weights / weights.sum()
    out = np.empty((count, k), dtype=np.int64)
    picks = rng.choice(len(weights), size=count, p=weights)
    for i, c in enumerate(picks):
        out[i] = rng.multinomial(n, vectors[c])
    return out
