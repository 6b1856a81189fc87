import math

import numpy as np
import pytest

from seqmix import (
    ConfigError,
    GaussianMeanModel,
    KLMatrix,
    NonUniqueClosestIndexError,
    closest_active_index,
    cross_kl_exp_family,
    exponential_rate_family,
    gaussian_shift_family,
    kl_numbers,
    loglr_increment,
)

# direct evaluations of the defining formulas, frozen as oracles
LOGLR_EXP_HALF_AT_2 = 1.0 + math.log(0.5)          # theta*x - psi = 1 - log 2
CROSS_EXP_03_05 = (-0.2) / 0.7 - (math.log(0.5) - math.log(0.7))


class TestLoglrIncrement:
    def test_gaussian_zero_crossing(self, gauss_model):
        # mu*x - mu^2/2 with mu=1, x=0.5
        assert loglr_increment(gauss_model, 0, 0.5) == 0.0

    def test_gaussian_at_origin(self, gauss_model):
        assert loglr_increment(gauss_model, 2, 0.0) == -4.5

    def test_exponential_family_value(self, exp_family):
        model = exp_family.to_alternatives((0.5,))
        got = loglr_increment(model, 0, 2.0)
        assert got == pytest.approx(LOGLR_EXP_HALF_AT_2, abs=1e-12)
        assert got == pytest.approx(0.3069, abs=5e-4)

    def test_index_out_of_range(self, gauss_model):
        with pytest.raises(IndexError):
            loglr_increment(gauss_model, 3, 0.0)
        with pytest.raises(IndexError):
            loglr_increment(gauss_model, -1, 0.0)

    def test_vectorized_matches_scalar(self, gauss_model):
        xs = np.linspace(-2, 2, 7)
        mat = gauss_model.loglr_matrix(xs)
        for i in range(3):
            np.testing.assert_array_equal(mat[:, i], gauss_model.loglr(i, xs))


class TestKLNumbers:
    def test_gaussian_closed_form(self, gauss_model):
        klm = kl_numbers(gauss_model)
        np.testing.assert_allclose(klm.info, [0.5, 2.0, 4.5], rtol=0, atol=0)
        assert klm.cross[1, 0] == 0.5  # (2-1)^2/2
        assert klm.cross[2, 0] == 2.0
        assert np.all(np.diag(klm.cross) == 0.0)

    def test_exponential_family_info(self, exp_family):
        model = exp_family.to_alternatives((0.5,))
        klm = kl_numbers(model)
        assert klm.info[0] == pytest.approx(1.0 + math.log(0.5), abs=1e-12)
        assert klm.info[0] == pytest.approx(0.3069, abs=5e-4)

    def test_monte_carlo_fallback_matches_closed_form(self, gauss_model):
        class Opaque(GaussianMeanModel):
            def closed_form_kl(self):
                return None

        est = kl_numbers(Opaque(means=gauss_model.means), reps=100_000, seed=11)
        exact = gauss_model.closed_form_kl()
        assert np.all(np.abs(est.info - exact.info) <= 3.0 * est.stderr_info + 1e-12)
        off = ~np.eye(3, dtype=bool)
        assert np.all(
            np.abs(est.cross - exact.cross)[off] <= (3.0 * est.stderr_cross + 1e-12)[off]
        )

    def test_embedded_gaussian_family_agrees_exactly(self, gauss_model):
        embedded = gaussian_shift_family().to_alternatives(gauss_model.means)
        a = kl_numbers(embedded)
        b = kl_numbers(gauss_model)
        np.testing.assert_allclose(a.info, b.info, rtol=0, atol=1e-12)
        np.testing.assert_allclose(a.cross, b.cross, rtol=0, atol=1e-12)

    def test_validation(self):
        with pytest.raises(ConfigError):
            KLMatrix(info=np.array([0.5, -1.0]), cross=np.zeros((2, 2)))
        with pytest.raises(ConfigError):
            KLMatrix(info=np.array([0.5, 1.0]), cross=np.full((2, 2), -0.1))
        with pytest.raises(ConfigError):
            KLMatrix(info=np.array([0.5, np.inf]), cross=np.zeros((2, 2)))


class TestClosestActiveIndex:
    def test_positive_weight_returns_self(self, gauss_model):
        klm = kl_numbers(gauss_model)
        assert closest_active_index(klm, [0.1, 0.2, 0.7], 1) == 1

    def test_zero_weight_picks_kl_nearest(self, gauss_model):
        klm = kl_numbers(gauss_model)
        # I_{0,1} = 0.5 beats I_{0,2} = 2
        assert closest_active_index(klm, [0.0, 0.5, 0.5], 0) == 1

    def test_equidistant_tie_raises(self):
        model = GaussianMeanModel(means=(1.0, 3.0, 2.0))
        klm = kl_numbers(model)
        with pytest.raises(NonUniqueClosestIndexError):
            closest_active_index(klm, [0.5, 0.5, 0.0], 2)

    def test_empty_support_rejected(self, gauss_model):
        klm = kl_numbers(gauss_model)
        with pytest.raises(ConfigError):
            closest_active_index(klm, [0.0, 0.0, 0.0], 0)


class TestCrossKL:
    def test_identity_case(self, exp_family):
        assert cross_kl_exp_family(exp_family, 0.4, 0.4) == 0.0

    def test_gaussian_family_closed_form(self):
        fam = gaussian_shift_family()
        assert cross_kl_exp_family(fam, 1.0, 2.0) == pytest.approx(0.5, abs=1e-14)

    def test_exponential_family_value(self, exp_family):
        got = cross_kl_exp_family(exp_family, 0.3, 0.5)
        assert got == pytest.approx(CROSS_EXP_03_05, abs=1e-12)
        assert got == pytest.approx(0.0508, abs=5e-4)

    def test_outside_domain(self, exp_family):
        with pytest.raises(ConfigError):
            cross_kl_exp_family(exp_family, 1.5, 0.5)


class TestModelValidation:
    def test_means_must_be_nonzero_distinct(self):
        with pytest.raises(ConfigError):
            GaussianMeanModel(means=(0.0, 1.0))
        with pytest.raises(ConfigError):
            GaussianMeanModel(means=(1.0, 1.0))

    def test_exp_alternatives_reject_null_point(self, exp_family):
        with pytest.raises(ConfigError):
            exp_family.to_alternatives((0.0, 0.5))


class TestSamplingInvariants:
    """Monte Carlo checks of the likelihood-ratio martingale and KL geometry."""

    N = 100_000

    @pytest.mark.parametrize("i", [0, 1, 2])
    def test_martingale_property_gaussian(self, gauss_model, i):
        rng = np.random.default_rng(100 + i)
        x = gauss_model.sample_null(rng, self.N)
        vals = np.exp(gauss_model.loglr(i, x))
        se = vals.std(ddof=1) / math.sqrt(self.N)
        assert abs(vals.mean() - 1.0) <= 3.0 * se

    @pytest.mark.parametrize("theta", [0.3, 0.5, 0.7])
    def test_martingale_property_exponential(self, exp_family, theta):
        model = exp_family.to_alternatives((theta,))
        rng = np.random.default_rng(17)
        x = model.sample_null(rng, self.N)
        vals = np.exp(model.loglr(0, x))
        se = vals.std(ddof=1) / math.sqrt(self.N)
        assert abs(vals.mean() - 1.0) <= 3.0 * se

    @pytest.mark.parametrize("i", [0, 1, 2])
    def test_kl_positivity_matches_closed_form(self, gauss_model, i):
        rng = np.random.default_rng(200 + i)
        x = gauss_model.sample_alt(i, rng, self.N)
        vals = gauss_model.loglr(i, x)
        se = vals.std(ddof=1) / math.sqrt(self.N)
        assert abs(vals.mean() - kl_numbers(gauss_model).info[i]) <= 3.0 * se

    def test_sample_alt_rows_distributions(self, gauss_model):
        rng = np.random.default_rng(3)
        idx = np.array([0, 2, 2, 1])
        rows = gauss_model.sample_alt_rows(rng, idx, 50_000)
        means = rows.mean(axis=1)
        np.testing.assert_allclose(means, [1.0, 3.0, 3.0, 2.0], atol=0.05)
