import numpy as np
import pytest
from scipy.special import expit, logit
from scipy.stats import binom

from znib import (
    ConstantHurdle,
    ConstantLogit,
    Dataset,
    Family,
    LogitLinear,
    ModelSpec,
    PowerLink,
    SoftmaxCovariate,
    ZnibParams,
    e_step,
    fit_binomial,
    fit_em,
    fit_grouped_hurdle,
    fit_model,
    fit_powerlink,
    powerlink_loglik,
    sample,
    znib_pmf,
)
from znib.fit import hurdle_loglik, hurdle_score, observed_loglik, powerlink_score
from znib.optim import central_diff_gradient

GENDER_COUNTS = np.array([215, 1485, 5331, 10649, 14959, 11929, 6678, 2092, 342])


def gender_dataset():
    return Dataset(
        y=np.arange(9),
        n=np.full(9, 8),
        X=np.ones((9, 1)),
        columns=("const",),
        mult=GENDER_COUNTS.astype(float),
        grouped=True,
    )


def simulate_constant_znib(n_obs, p, q0, qN, N, seed):
    rng = np.random.default_rng(seed)
    u = rng.random(n_obs)
    body = rng.binomial(N, p, size=n_obs)
    y = np.where(u < q0, 0, np.where(u < q0 + qN, N, body))
    return Dataset(
        y=y, n=np.full(n_obs, N), X=np.ones((n_obs, 1)), columns=("const",)
    )


class TestObservedLoglik:
    def test_matches_pmf_sum(self):
        data = simulate_constant_znib(50, 0.4, 0.15, 0.1, 5, seed=0)
        spec = ModelSpec(Family.ZNIB, inflation=ConstantHurdle())
        theta0 = np.log(0.15 / 0.75)
        thetaN = np.log(0.10 / 0.75)
        packed = np.array([logit(0.4), theta0, thetaN])
        law = ZnibParams(5, 0.4, 0.15, 0.10)
        direct = sum(np.log(znib_pmf(int(k), law)) for k in data.y)
        assert observed_loglik(spec, packed, data) == pytest.approx(direct, rel=1e-12)

    def test_multiplicities_scale(self):
        data = gender_dataset()
        spec = ModelSpec(Family.ZNIB, inflation=ConstantHurdle())
        packed = np.array([0.1, -6.0, -6.0])
        single = Dataset(y=data.y, n=data.n, X=data.X, columns=data.columns)
        ll_w = observed_loglik(spec, packed, data)
        rows = np.array(
            [observed_loglik(spec, packed, Dataset(
                y=[int(data.y[i])], n=[8], X=np.ones((1, 1)), columns=("const",)))
             for i in range(9)]
        )
        assert ll_w == pytest.approx(float(GENDER_COUNTS @ rows), rel=1e-12)
        assert observed_loglik(spec, packed, single) == pytest.approx(rows.sum())


class TestEStep:
    def test_frozen_zero_row(self):
        data = Dataset(y=[0], n=[2], X=np.ones((1, 1)), columns=("const",))
        Z = e_step(data, np.array([0.5]), np.array([1 / 3]), np.array([1 / 3]))
        assert Z[0] == pytest.approx([0.8, 0.0, 0.2], abs=1e-12)

    def test_interior_rows_deterministic(self):
        data = Dataset(y=[1], n=[2], X=np.ones((1, 1)), columns=("const",))
        Z = e_step(data, np.array([0.5]), np.array([0.3]), np.array([0.3]))
        assert Z[0] == pytest.approx([0.0, 0.0, 1.0])

    def test_rows_sum_to_one(self):
        data = simulate_constant_znib(40, 0.6, 0.2, 0.1, 4, seed=1)
        Z = e_step(data, np.full(40, 0.6), np.full(40, 0.2), np.full(40, 0.1))
        assert Z.sum(axis=1) == pytest.approx(np.ones(40))
        assert np.all(Z >= 0)

    def test_zero_mass_rejected(self):
        data = Dataset(y=[1], n=[2], X=np.ones((1, 1)), columns=("const",))
        with pytest.raises(ValueError):
            e_step(data, np.array([0.5]), np.array([0.5]), np.array([0.5]))


class TestFitBinomial:
    def test_single_cell(self):
        data = Dataset(y=[3], n=[10], X=np.ones((1, 1)), columns=("const",))
        fit = fit_binomial(data)
        assert expit(fit.estimates[0]) == pytest.approx(0.3, abs=1e-10)
        assert fit.loglik == pytest.approx(binom.logpmf(3, 10, 0.3), rel=1e-10)
        # observed information of the logit is n p (1-p) = 2.1
        assert fit.std_errors[0] == pytest.approx(1.0 / np.sqrt(2.1), rel=1e-5)
        assert fit.n_params == 1
        assert fit.converged

    def test_covariate_fit(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=600)
        beta = np.array([0.4, -0.9])
        n = np.full(600, 7)
        y = rng.binomial(n, expit(beta[0] + beta[1] * x))
        data = Dataset(y=y, n=n, X=np.column_stack([np.ones(600), x]),
                       columns=("const", "x"))
        spec = ModelSpec(Family.BINOMIAL, success=LogitLinear(("const", "x")))
        fit = fit_model(data, spec)
        assert fit.estimates == pytest.approx(beta, abs=0.15)
        assert np.all(np.isfinite(fit.std_errors))

    def test_aic_definition(self):
        data = Dataset(y=[3], n=[10], X=np.ones((1, 1)), columns=("const",))
        fit = fit_binomial(data)
        assert fit.aic == pytest.approx(2.0 - 2.0 * fit.loglik)


class TestFitEm:
    def test_constant_hurdle_recovery(self):
        data = simulate_constant_znib(4000, 0.45, 0.15, 0.10, 6, seed=3)
        spec = ModelSpec(Family.ZNIB, inflation=ConstantHurdle())
        fit = fit_em(data, spec)
        assert fit.converged
        p_hat = expit(fit.estimates[0])
        q0_hat = fit.fitted[0, 1]
        qN_hat = fit.fitted[0, 2]
        assert p_hat == pytest.approx(0.45, abs=0.03)
        assert q0_hat == pytest.approx(0.15, abs=0.03)
        assert qN_hat == pytest.approx(0.10, abs=0.03)

    def test_trace_monotone(self):
        data = simulate_constant_znib(1500, 0.5, 0.2, 0.1, 5, seed=4)
        spec = ModelSpec(Family.ZNIB, inflation=ConstantHurdle())
        fit = fit_em(data, spec)
        trace = np.array(fit.trace)
        assert np.all(np.diff(trace) >= -1e-8 * np.abs(trace[:-1]))
        assert fit.loglik == pytest.approx(trace[-1])

    def test_loglik_is_observed_loglik(self):
        data = simulate_constant_znib(800, 0.5, 0.2, 0.1, 5, seed=5)
        spec = ModelSpec(Family.ZNIB, inflation=ConstantHurdle())
        fit = fit_em(data, spec)
        assert fit.loglik == pytest.approx(
            observed_loglik(spec, fit.estimates, data), rel=1e-12
        )

    def test_covariate_softmax(self):
        rng = np.random.default_rng(6)
        n_obs = 3000
        x = rng.normal(size=n_obs)
        X = np.column_stack([np.ones(n_obs), x])
        beta0 = np.array([-1.2, 0.8])     # zero-inflation logits
        gamma0 = np.array([-1.5, -0.6])   # N-inflation logits
        p_true = 0.55
        e0 = np.exp(X @ beta0)
        eN = np.exp(X @ gamma0)
        q0 = e0 / (1 + e0 + eN)
        qN = eN / (1 + e0 + eN)
        u = rng.random(n_obs)
        N = 4
        body = rng.binomial(N, p_true, size=n_obs)
        y = np.where(u < q0, 0, np.where(u < q0 + qN, N, body))
        data = Dataset(y=y, n=np.full(n_obs, N), X=X, columns=("const", "x"))
        spec = ModelSpec(
            Family.ZNIB, inflation=SoftmaxCovariate(("const", "x"))
        )
        fit = fit_em(data, spec)
        assert fit.converged
        est = fit.params()
        assert expit(est["logit_p"]) == pytest.approx(p_true, abs=0.03)
        assert est["infl0[const]"] == pytest.approx(beta0[0], abs=0.35)
        assert est["infl0[x]"] == pytest.approx(beta0[1], abs=0.35)
        assert est["inflN[const]"] == pytest.approx(gamma0[0], abs=0.35)
        assert est["inflN[x]"] == pytest.approx(gamma0[1], abs=0.35)

    def test_zib_reduction(self):
        rng = np.random.default_rng(7)
        n_obs = 2500
        u = rng.random(n_obs)
        body = rng.binomial(4, 0.6, size=n_obs)
        y = np.where(u < 0.25, 0, body)
        data = Dataset(y=y, n=np.full(n_obs, 4), X=np.ones((n_obs, 1)),
                       columns=("const",))
        spec = ModelSpec(Family.ZIB, inflation=ConstantHurdle())
        fit = fit_em(data, spec)
        assert fit.converged
        assert np.all(fit.fitted[:, 2] < 1e-10)
        assert fit.fitted[0, 1] == pytest.approx(0.25, abs=0.03)

    def test_multiplicity_equals_replication(self):
        y = np.array([0, 1, 2, 3, 4])
        n = np.full(5, 4)
        mult = np.array([30.0, 10.0, 15.0, 12.0, 20.0])
        grouped = Dataset(y=y, n=n, X=np.ones((5, 1)), columns=("const",),
                          mult=mult, grouped=True)
        reps = np.repeat(np.arange(5), mult.astype(int))
        expanded = Dataset(y=y[reps], n=n[reps], X=np.ones((reps.size, 1)),
                           columns=("const",))
        spec = ModelSpec(Family.ZNIB, inflation=ConstantHurdle())
        f1 = fit_em(grouped, spec)
        f2 = fit_em(expanded, spec)
        assert f1.estimates == pytest.approx(f2.estimates, abs=1e-5)
        assert f1.loglik == pytest.approx(f2.loglik, rel=1e-9)

    def test_family_guard(self):
        data = simulate_constant_znib(10, 0.5, 0.1, 0.1, 3, seed=8)
        with pytest.raises(ValueError):
            fit_em(data, ModelSpec(Family.BETA_BINOMIAL))


class TestGroupedHurdle:
    def test_gender_binomial(self):
        fit = fit_grouped_hurdle(gender_dataset(), Family.BINOMIAL)
        assert fit.converged
        assert expit(fit.estimates[0]) == pytest.approx(0.5147, abs=1e-3)
        assert fit.expected_counts[0] == pytest.approx(165.22, abs=0.5)

    def test_gender_znibb_boundaries_clear(self):
        fit = fit_grouped_hurdle(gender_dataset(), Family.ZNIBB)
        assert fit.converged
        assert not fit.boundary_flags.any()
        assert np.all(np.isfinite(fit.std_errors))
        assert fit.expected_counts.sum() == pytest.approx(53680.0, rel=1e-3)

    def test_simulated_znib_recovery(self):
        law = ZnibParams(6, 0.4, 0.05, 0.08)
        draws = sample(law, 60_000, seed=9)
        counts = np.bincount(draws, minlength=7).astype(float)
        data = Dataset(y=np.arange(7), n=np.full(7, 6), X=np.ones((7, 1)),
                       columns=("const",), mult=np.maximum(counts, 1.0),
                       grouped=True)
        fit = fit_grouped_hurdle(data, Family.ZNIB)
        assert fit.converged
        assert expit(fit.estimates[0]) == pytest.approx(0.4, abs=0.01)
        assert fit.fitted[0, 1] == pytest.approx(0.05, abs=0.01)
        assert fit.fitted[0, 2] == pytest.approx(0.08, abs=0.01)

    def test_common_n_required(self):
        data = Dataset(y=[0, 1], n=[2, 3], X=np.ones((2, 1)),
                       columns=("const",), mult=[5.0, 5.0], grouped=True)
        with pytest.raises(ValueError):
            fit_grouped_hurdle(data, Family.ZNIBB)

    def test_string_family_accepted(self):
        fit = fit_grouped_hurdle(gender_dataset(), "betabin")
        assert fit.spec.family is Family.BETA_BINOMIAL

    @pytest.mark.parametrize("family", [Family.BINOMIAL, Family.BETA_BINOMIAL,
                                        Family.ZNIB, Family.ZNIBB])
    def test_analytic_scores(self, family):
        data = gender_dataset()
        rng = np.random.default_rng(10)
        sizes = {Family.BINOMIAL: 1, Family.BETA_BINOMIAL: 2,
                 Family.ZNIB: 3, Family.ZNIBB: 4}
        for _ in range(5):
            params = rng.normal(scale=0.8, size=sizes[family])
            if family in (Family.BETA_BINOMIAL, Family.ZNIBB):
                params[:2] = rng.normal(loc=2.0, scale=0.5, size=2)
            if family in (Family.ZNIB, Family.ZNIBB):
                params[-2:] = rng.normal(loc=-5.0, size=2)
            g = hurdle_score(family, params, data)
            g_fd = central_diff_gradient(
                lambda v: hurdle_loglik(family, v, data), params
            )
            scale = max(1.0, np.max(np.abs(g_fd)))
            assert g == pytest.approx(g_fd, abs=1e-4 * scale)


class TestPowerlink:
    def _simulate(self, seed, n_obs=1200, beta=(0.2, 0.9), la0=0.3, laN=-0.2, N=5):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=n_obs)
        X = np.column_stack([np.ones(n_obs), x])
        beta = np.asarray(beta)
        p = expit(X @ beta)
        a0, aN = np.exp(la0), np.exp(laN)
        num0 = p ** a0
        numN = (1 - p) ** aN
        denom = 1 + num0 + numN
        q0, qN = num0 / denom, numN / denom
        u = rng.random(n_obs)
        body = rng.binomial(N, p)
        y = np.where(u < q0, 0, np.where(u < q0 + qN, N, body))
        return Dataset(y=y, n=np.full(n_obs, N), X=X, columns=("const", "x"))

    def test_loglik_matches_manual_mixture(self):
        data = self._simulate(11, n_obs=30)
        params = np.array([0.1, 0.5, 0.2, -0.1])
        p = expit(data.X @ params[:2])
        a0, aN = np.exp(params[2]), np.exp(params[3])
        num0, numN = p ** a0, (1 - p) ** aN
        denom = 1 + num0 + numN
        q0, qN = num0 / denom, numN / denom
        manual = 0.0
        for i in range(30):
            law = ZnibParams(5, float(p[i]), float(q0[i]), float(qN[i]))
            manual += np.log(znib_pmf(int(data.y[i]), law))
        assert powerlink_loglik(params, data) == pytest.approx(manual, rel=1e-10)

    def test_analytic_score(self):
        data = self._simulate(12, n_obs=150)
        rng = np.random.default_rng(13)
        for _ in range(5):
            params = rng.normal(scale=0.6, size=4)
            g = powerlink_score(params, data)
            g_fd = central_diff_gradient(lambda v: powerlink_loglik(v, data), params)
            scale = max(1.0, np.max(np.abs(g_fd)))
            assert g == pytest.approx(g_fd, abs=1e-4 * scale)

    def test_recovery(self):
        data = self._simulate(14, n_obs=5000)
        spec = ModelSpec(
            Family.ZNIB,
            success=LogitLinear(("const", "x")),
            inflation=PowerLink(),
        )
        fit = fit_powerlink(data, spec)
        assert fit.converged
        est = fit.params()
        assert est["beta[const]"] == pytest.approx(0.2, abs=0.15)
        assert est["beta[x]"] == pytest.approx(0.9, abs=0.15)
        assert est["log_alpha0"] == pytest.approx(0.3, abs=0.4)
        assert est["log_alphaN"] == pytest.approx(-0.2, abs=0.4)

    def test_reflection_symmetry(self):
        data = self._simulate(15, n_obs=400)
        mirrored = Dataset(y=data.n - data.y, n=data.n, X=data.X,
                           columns=data.columns)
        spec = ModelSpec(
            Family.ZNIB,
            success=LogitLinear(("const", "x")),
            inflation=PowerLink(),
        )
        f1 = fit_powerlink(data, spec)
        f2 = fit_powerlink(mirrored, spec)
        assert f1.aic == pytest.approx(f2.aic, abs=1e-6)
        assert f2.estimates[:2] == pytest.approx(-f1.estimates[:2], abs=1e-5)
        assert f2.estimates[2] == pytest.approx(f1.estimates[3], abs=1e-5)
        assert f2.estimates[3] == pytest.approx(f1.estimates[2], abs=1e-5)

    def test_spec_guard(self):
        data = self._simulate(16, n_obs=20)
        with pytest.raises(ValueError):
            fit_powerlink(data, ModelSpec(Family.ZNIB, inflation=ConstantHurdle()))


class TestFitModelDispatch:
    def test_grouped_binomial_routes_to_hurdle(self):
        fit = fit_model(gender_dataset(), ModelSpec(Family.BINOMIAL))
        assert fit.expected_counts is not None

    def test_betabin_routes_to_hurdle(self):
        fit = fit_model(gender_dataset(), ModelSpec(Family.BETA_BINOMIAL))
        assert fit.spec.family is Family.BETA_BINOMIAL

    def test_znib_em_route(self):
        data = simulate_constant_znib(500, 0.5, 0.1, 0.1, 4, seed=17)
        fit = fit_model(data, ModelSpec(Family.ZNIB, inflation=ConstantHurdle()))
        assert fit.trace is not None  # EM path records a trace
