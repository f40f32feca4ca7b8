import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from znib import (
    BetaBinParams,
    InflationLogits,
    ZipPair,
    ZnibParams,
    ZnibbParams,
    ZnimParams,
    betabin_log_pmf,
    conditional_oracle,
    logits_to_weights,
    reflect,
    sample,
    zip_condition,
    znib_central_moment,
    znib_log_pmf,
    znib_moments,
    znib_pmf,
    znib_pmf_vector,
    znibb_pmf,
    znim_pmf,
)
from znib.distributions import znim_mixture_pmf

PARAM_GRID = [
    ZnibParams(n, p, q0, qN)
    for n in (0, 1, 2, 3, 8, 20)
    for p in (0.0, 0.1, 0.5, 0.9, 1.0)
    for q0, qN in ((0.0, 0.0), (0.3, 0.0), (0.0, 0.3), (0.2, 0.3), (0.5, 0.5), (1.0, 0.0), (0.0, 1.0))
]


class TestZnibPmf:
    def test_pure_binomial_case(self):
        assert znib_pmf(0, ZnibParams(3, 0.5)) == pytest.approx(0.125, abs=1e-15)

    def test_three_term_mixture(self):
        law = ZnibParams(2, 0.5, 0.2, 0.3)
        assert znib_pmf_vector(law) == pytest.approx([0.325, 0.25, 0.425], abs=1e-15)

    def test_empty_trial(self):
        assert znib_pmf(0, ZnibParams(0, 0.7)) == 1.0

    def test_out_of_range_k(self):
        with pytest.raises(ValueError):
            znib_pmf(4, ZnibParams(3, 0.5))

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            ZnibParams(3, 0.5, 0.6, 0.6)
        with pytest.raises(ValueError):
            ZnibParams(-1, 0.5)
        with pytest.raises(ValueError):
            ZnibParams(3, 1.5)

    @pytest.mark.parametrize("law", PARAM_GRID)
    def test_normalization_grid(self, law):
        assert znib_pmf_vector(law).sum() == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("law", PARAM_GRID)
    def test_log_pmf_consistency(self, law):
        for k in range(law.n_trials + 1):
            pmf = znib_pmf(k, law)
            if pmf > 1e-300:
                assert np.exp(znib_log_pmf(k, law)) == pytest.approx(pmf, rel=1e-12)

    def test_large_n_no_overflow(self):
        law = ZnibParams(3000, 0.4, 0.05, 0.05)
        assert znib_pmf_vector(law).sum() == pytest.approx(1.0, abs=1e-10)


class TestMoments:
    def test_mean_variance(self):
        mean, var = znib_moments(ZnibParams(10, 0.3, 0.1, 0.2))
        assert mean == pytest.approx(4.1, abs=1e-12)
        assert var == pytest.approx(10.96, abs=1e-12)

    def test_binomial_reduction(self):
        mean, var = znib_moments(ZnibParams(10, 0.3))
        assert mean == pytest.approx(3.0)
        assert var == pytest.approx(2.1)

    def test_degenerate_zero(self):
        assert znib_moments(ZnibParams(10, 0.3, 1.0, 0.0)) == pytest.approx((0.0, 0.0))

    @pytest.mark.parametrize("law", [p for p in PARAM_GRID if p.n_trials > 0])
    def test_against_enumeration(self, law):
        pmf = znib_pmf_vector(law)
        k = np.arange(law.n_trials + 1)
        mean, var = znib_moments(law)
        assert mean == pytest.approx((k * pmf).sum(), abs=1e-10)
        assert var == pytest.approx(((k - mean) ** 2 * pmf).sum(), abs=1e-10)


class TestCentralMoments:
    def test_first_vanishes(self):
        assert znib_central_moment(1, ZnibParams(7, 0.4, 0.1, 0.2)) == pytest.approx(0.0, abs=1e-12)

    def test_second_matches_variance(self):
        assert znib_central_moment(2, ZnibParams(10, 0.3, 0.1, 0.2)) == pytest.approx(10.96, abs=1e-12)

    def test_third_frozen_value(self):
        # enumeration oracle: sum (k - mu)^3 pmf(k) over k=0..10
        assert znib_central_moment(3, ZnibParams(10, 0.3, 0.1, 0.2)) == pytest.approx(
            28.989, abs=1e-10
        )

    def test_symmetric_case_is_zero(self):
        assert znib_central_moment(3, ZnibParams(4, 0.5, 0.25, 0.25)) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            znib_central_moment(0, ZnibParams(3, 0.5))

    @pytest.mark.parametrize("law", [p for p in PARAM_GRID if p.n_trials > 0])
    @pytest.mark.parametrize("j", [2, 3, 4])
    def test_against_enumeration(self, law, j):
        pmf = znib_pmf_vector(law)
        k = np.arange(law.n_trials + 1)
        mu = (k * pmf).sum()
        expected = ((k - mu) ** j * pmf).sum()
        assert znib_central_moment(j, law) == pytest.approx(expected, abs=1e-10)


class TestLogitsToWeights:
    def test_symmetric(self):
        assert logits_to_weights(InflationLogits(0.0, 0.0)) == pytest.approx((1 / 3, 1 / 3))

    def test_vanishing(self):
        q0, qN = logits_to_weights(InflationLogits(-30.0, -30.0))
        assert q0 + qN < 1e-12

    def test_softmax_arithmetic(self):
        q0, qN = logits_to_weights(InflationLogits(np.log(2.0), 0.0))
        assert (q0, qN) == pytest.approx((0.5, 0.25), abs=1e-14)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            InflationLogits(np.inf, 0.0)

    @given(
        t0=st.floats(-34, 34),
        tN=st.floats(-34, 34),
        bump=st.floats(1e-6, 1.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_constraint_and_monotonicity(self, t0, tN, bump):
        q0, qN = logits_to_weights(InflationLogits(t0, tN))
        assert q0 > 0 and qN > 0 and q0 + qN < 1
        q0b, _ = logits_to_weights(InflationLogits(t0 + bump, tN))
        assert q0b >= q0


class TestZipConditioning:
    def test_symmetric_construction(self):
        law = zip_condition(ZipPair(1.0, 0.5, 1.0, 0.5), 2)
        assert law.p == 0.5
        assert law.q0 == pytest.approx(law.qN)
        assert law.q0 == pytest.approx(0.2880584, abs=1e-6)

    def test_oracle_frozen_values(self):
        probs = conditional_oracle(ZipPair(1.0, 0.5, 1.0, 0.5), 2)
        assert probs == pytest.approx([0.39402922, 0.21194156, 0.39402922], abs=1e-7)

    def test_poisson_classic(self):
        from scipy.stats import binom

        probs = conditional_oracle(ZipPair(2.0, 1.0, 2.0, 1.0), 4)
        assert probs == pytest.approx(binom.pmf(np.arange(5), 4, 0.5), abs=1e-12)

    def test_no_inflation_gives_binomial(self):
        from scipy.stats import binom

        law = zip_condition(ZipPair(1.0, 1.0, 3.0, 1.0), 6)
        assert znib_pmf_vector(law) == pytest.approx(binom.pmf(np.arange(7), 6, 0.25), abs=1e-12)

    def test_n_zero_degenerate(self):
        law = zip_condition(ZipPair(1.0, 0.5, 1.0, 0.5), 0)
        assert znib_pmf_vector(law) == pytest.approx([1.0])
        assert conditional_oracle(ZipPair(1.0, 0.5, 1.0, 0.5), 0) == pytest.approx([1.0])

    @pytest.mark.parametrize("mu1", [0.3, 1.0, 5.0])
    @pytest.mark.parametrize("mu2", [0.5, 2.0])
    @pytest.mark.parametrize("q1", [0.1, 0.6, 1.0])
    @pytest.mark.parametrize("q2", [0.4, 0.9])
    @pytest.mark.parametrize("n", [1, 2, 7, 15])
    def test_equivalence_grid(self, mu1, mu2, q1, q2, n):
        pair = ZipPair(mu1, q1, mu2, q2)
        assert znib_pmf_vector(zip_condition(pair, n)) == pytest.approx(
            conditional_oracle(pair, n), abs=1e-12
        )


class TestBetaBinomial:
    def test_uniform_case(self):
        for k in range(9):
            assert betabin_log_pmf(k, BetaBinParams(8, 1.0, 1.0)) == pytest.approx(np.log(1 / 9))

    def test_normalization(self):
        params = BetaBinParams(8, 34.0, 34.0)
        total = sum(np.exp(betabin_log_pmf(k, params)) for k in range(9))
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_empty_trial(self):
        assert betabin_log_pmf(0, BetaBinParams(0, 2.0, 3.0)) == 0.0

    def test_invalid_shapes(self):
        with pytest.raises(ValueError):
            BetaBinParams(8, -1.0, 1.0)

    def test_against_direct_beta_evaluation(self):
        from scipy.special import betaln, comb

        params = BetaBinParams(8, 34.0, 34.0)
        direct = comb(8, 4) * np.exp(betaln(4 + 34.0, 4 + 34.0) - betaln(34.0, 34.0))
        assert np.exp(betabin_log_pmf(4, params)) == pytest.approx(direct, rel=1e-12)


class TestZnibb:
    def test_reduction(self):
        base = BetaBinParams(8, 3.0, 5.0)
        law = ZnibbParams(base)
        for k in range(9):
            assert znibb_pmf(k, law) == pytest.approx(np.exp(betabin_log_pmf(k, base)))

    def test_hand_mixture(self):
        law = ZnibbParams(BetaBinParams(8, 1.0, 1.0), 0.1, 0.1)
        assert znibb_pmf(0, law) == pytest.approx(0.1 + 0.8 / 9, abs=1e-12)

    def test_degenerate(self):
        law = ZnibbParams(BetaBinParams(8, 1.0, 1.0), 1.0, 0.0)
        assert znibb_pmf(0, law) == pytest.approx(1.0)

    def test_normalization(self):
        law = ZnibbParams(BetaBinParams(12, 2.5, 0.7), 0.15, 0.25)
        total = sum(znibb_pmf(k, law) for k in range(13))
        assert total == pytest.approx(1.0, abs=1e-10)


def _compositions(n, k):
    if k == 1:
        yield (n,)
        return
    for head in range(n + 1):
        for rest in _compositions(n - head, k - 1):
            yield (head,) + rest


class TestZnim:
    def test_plain_multinomial_reduction(self):
        from scipy.stats import multinomial

        law = ZnimParams(4, (0.2, 0.3, 0.5), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0))
        for y in _compositions(4, 3):
            assert znim_pmf(y, law) == pytest.approx(
                multinomial.pmf(y, 4, [0.2, 0.3, 0.5]), abs=1e-14
            )

    def test_hand_mixture(self):
        law = ZnimParams(2, (1 / 3, 1 / 3, 1 / 3), (0.0, 0.0, 0.0), (0.1, 0.0, 0.0))
        assert znim_pmf((2, 0, 0), law) == pytest.approx(0.2, abs=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 4, 6])
    def test_simplex_normalization(self, n):
        law = ZnimParams(n, (0.5, 0.3, 0.2), (0.1, 0.05, 0.0), (0.1, 0.0, 0.15))
        total = sum(znim_pmf(y, law) for y in _compositions(n, 3))
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_sum_constraint_enforced(self):
        law = ZnimParams(4, (0.2, 0.3, 0.5), (0.0,) * 3, (0.0,) * 3)
        with pytest.raises(ValueError):
            znim_pmf((1, 1, 1), law)

    def test_user_supplied_components(self):
        # two-category simultaneous inflation goes through explicit lists
        weights = [0.8, 0.2]
        vectors = [np.array([0.25, 0.25, 0.5]), np.array([0.0, 0.0, 1.0])]
        total = sum(
            znim_mixture_pmf(y, 3, weights, vectors) for y in _compositions(3, 3)
        )
        assert total == pytest.approx(1.0, abs=1e-12)


class TestSampling:
    def test_degenerate(self):
        draws = sample(ZnibParams(5, 0.5, 1.0, 0.0), 5, seed=0)
        assert (draws == 0).all()

    def test_determinism(self):
        law = ZnibParams(2, 0.5, 0.2, 0.3)
        assert np.array_equal(sample(law, 1000, seed=42), sample(law, 1000, seed=42))

    def test_empirical_frequencies(self):
        law = ZnibParams(2, 0.5, 0.2, 0.3)
        draws = sample(law, 10**6, seed=7)
        freq = np.bincount(draws, minlength=3) / 1e6
        assert freq == pytest.approx([0.325, 0.25, 0.425], abs=0.002)

    def test_znibb_empirical(self):
        law = ZnibbParams(BetaBinParams(4, 2.0, 3.0), 0.1, 0.2)
        draws = sample(law, 200_000, seed=11)
        freq = np.bincount(draws, minlength=5) / draws.size
        expected = [znibb_pmf(k, law) for k in range(5)]
        assert freq == pytest.approx(expected, abs=0.005)

    def test_zip_pair_shape(self):
        pairs = sample(ZipPair(1.0, 0.5, 2.0, 0.8), 100, seed=3)
        assert pairs.shape == (100, 2)
        assert (pairs >= 0).all()

    def test_znim_rows_sum(self):
        law = ZnimParams(5, (0.5, 0.3, 0.2), (0.1, 0.0, 0.0), (0.0, 0.1, 0.0))
        draws = sample(law, 500, seed=9)
        assert (draws.sum(axis=1) == 5).all()

    def test_negative_count(self):
        with pytest.raises(ValueError):
            sample(ZnibParams(2, 0.5), -1, seed=0)


class TestReflect:
    def test_involution(self):
        law = ZnibParams(6, 0.25, 0.1, 0.25)
        assert reflect(reflect(law)) == law

    def test_pmf_identity(self):
        law = ZnibParams(5, 0.37, 0.12, 0.4)
        direct = znib_pmf_vector(law)
        mirrored = znib_pmf_vector(reflect(law))
        assert mirrored == pytest.approx(direct[::-1], abs=1e-15)

    def test_hall_asymmetry_witness(self):
        zib = ZnibParams(3, 0.4, 0.2, 0.0)
        assert znib_pmf(0, zib) == pytest.approx(0.3728, abs=1e-12)
        mirrored = reflect(zib)
        assert mirrored.qN == 0.2 and mirrored.q0 == 0.0

    @given(
        n=st.integers(0, 15),
        p=st.floats(0, 1),
        q0=st.floats(0, 1),
        frac=st.floats(0, 1),
    )
    @settings(max_examples=150, deadline=None)
    def test_reflection_property(self, n, p, q0, frac):
        qN = (1.0 - q0) * frac
        law = ZnibParams(n, p, q0, qN)
        mirrored = znib_pmf_vector(reflect(law))
        assert mirrored == pytest.approx(znib_pmf_vector(law)[::-1], abs=1e-14)
