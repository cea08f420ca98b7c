import numpy as np
import pytest

from orthocal import (
    GAUGE_CORRELATION_BLOCK,
    CovarianceStructure,
    RankError,
    build_twelve_eq_system,
    monte_carlo,
    noise_covariance_six,
    noise_covariance_twelve,
    offset_covariance_six,
    offset_covariance_twelve,
    propagate_covariance,
)


class TestNoiseCovariance:
    def test_six_is_scaled_identity(self):
        cov = noise_covariance_six(0.5)
        assert cov.structure is CovarianceStructure.SCALED_IDENTITY
        np.testing.assert_allclose(cov.matrix, 2 * 0.25 * np.eye(6), atol=0)

    def test_twelve_is_block_g(self):
        cov = noise_covariance_twelve(2.0)
        assert cov.structure is CovarianceStructure.BLOCK_G
        expected = 4.0 * np.kron(np.eye(3), GAUGE_CORRELATION_BLOCK)
        np.testing.assert_allclose(cov.matrix, expected, atol=0)
        # symmetric positive semidefinite
        np.testing.assert_allclose(cov.matrix, cov.matrix.T, atol=0)
        assert np.linalg.eigvalsh(cov.matrix).min() >= 0


class TestAnalyticPropagation:
    def test_identity_design(self):
        sigma = 0.3
        V = propagate_covariance(np.eye(3), 2 * sigma**2 * np.eye(3))
        np.testing.assert_allclose(V, 2 * sigma**2 * np.eye(3), atol=1e-15)
        assert np.sqrt(np.trace(V) / 3) == pytest.approx(np.sqrt(2) * sigma, rel=1e-12)

    def test_six_equation_factor(self, geom):
        cov = offset_covariance_six(geom, 1.0)
        assert cov.sigma_rho == pytest.approx(1.9843155282433684, rel=1e-12)
        assert cov.sigma_rho == pytest.approx(1.98, abs=0.01)

    def test_twelve_equation_factor(self, geom):
        cov = offset_covariance_twelve(geom, 1.0)
        assert cov.sigma_rho == pytest.approx(2.065773686280565, rel=1e-12)
        assert cov.sigma_rho == pytest.approx(2.06, abs=0.01)

    def test_six_beats_twelve(self, geom):
        assert (
            offset_covariance_twelve(geom, 1.0).sigma_rho
            > offset_covariance_six(geom, 1.0).sigma_rho
        )

    def test_linear_in_sigma(self, geom):
        base = offset_covariance_six(geom, 0.01).sigma_rho
        assert offset_covariance_six(geom, 0.02).sigma_rho == pytest.approx(
            2 * base, rel=1e-14
        )

    def test_sandwich_collapses_for_identity_correlation(self, geom):
        J = build_twelve_eq_system(geom).design_matrix
        sigma = 0.7
        V = propagate_covariance(J, sigma**2 * np.eye(12))
        np.testing.assert_allclose(
            V, np.linalg.inv(J.T @ J) * sigma**2, atol=1e-15
        )

    def test_correlation_matters(self, geom):
        # dropping the true correlation (using 2I) shifts sigma_rho by far
        # more than 1%
        J = build_twelve_eq_system(geom).design_matrix
        V_wrong = propagate_covariance(J, 2.0 * np.eye(12))
        wrong = np.sqrt(np.trace(V_wrong) / 3)
        true = offset_covariance_twelve(geom, 1.0).sigma_rho
        assert abs(wrong - true) / true > 0.01
        assert wrong == pytest.approx(2.6398447319376848, rel=1e-12)

    def test_covariance_properties(self, geom):
        for cov in (offset_covariance_six(geom, 0.13), offset_covariance_twelve(geom, 0.13)):
            V = cov.V
            assert np.abs(V - V.T).max() <= 1e-14 * np.abs(V).max()
            assert np.linalg.eigvalsh(V).min() > 0
            assert cov.sigma_rho == pytest.approx(np.sqrt(np.trace(V) / 3), rel=1e-15)

    def test_rank_error(self):
        with pytest.raises(RankError):
            propagate_covariance(np.ones((6, 3)), np.eye(6))

    def test_negative_sigma_rejected(self, geom):
        with pytest.raises(ValueError):
            offset_covariance_six(geom, -1.0)


class TestMonteCarlo:
    def test_noiseless_recovery(self, geom):
        rep = monte_carlo([0.5, -0.5, 0.5], 0.0, runs=20, replications=2,
                          method="nonlinear-six", seed=1)
        assert np.abs(rep.per_axis_mean).max() <= 1e-6
        assert rep.pooled_std == 0.0
        assert rep.failed_runs == 0

    def test_deterministic_under_seed(self, geom):
        a = monte_carlo([0.1] * 3, 0.01, 500, 2, "six", seed=7)
        b = monte_carlo([0.1] * 3, 0.01, 500, 2, "six", seed=7)
        assert a.pooled_std == b.pooled_std
        np.testing.assert_allclose(a.per_axis_mean, b.per_axis_mean, atol=0)
        c = monte_carlo([0.1] * 3, 0.01, 500, 2, "six", seed=8)
        assert a.pooled_std != c.pooled_std

    def test_replication_streams_are_shifted_seeds(self, geom):
        # replication r uses seed + r, so a two-replication report matches
        # two one-replication reports at consecutive seeds
        both = monte_carlo([0.1] * 3, 0.01, 300, 2, "six", seed=40)
        first = monte_carlo([0.1] * 3, 0.01, 300, 1, "six", seed=40)
        second = monte_carlo([0.1] * 3, 0.01, 300, 1, "six", seed=41)
        assert both.pooled_std == pytest.approx(
            (first.pooled_std + second.pooled_std) / 2, rel=1e-15
        )

    @pytest.mark.parametrize("method, factor", [("six", 1.9843155282433684),
                                                ("twelve", 2.065773686280565)])
    def test_matches_analytic_covariance(self, geom, method, factor):
        # pooled Monte-Carlo std vs the analytic propagation, 3% at 1e4 runs
        sigma = 0.01
        rep = monte_carlo([0.1] * 3, sigma, runs=10000, replications=1,
                          method=method, seed=2)
        assert rep.pooled_std == pytest.approx(factor * sigma, rel=0.03)

    def test_linear_unbiased_at_small_offsets(self, geom):
        sigma = 0.01
        rep = monte_carlo([0.1] * 3, sigma, runs=10000, replications=1,
                          method="six", seed=3)
        bound = 4 * 1.9843155282433684 * sigma / np.sqrt(10000)
        assert np.abs(rep.per_axis_mean).max() <= bound

    def test_nonlinear_unbiased_at_large_offsets(self, geom):
        rep = monte_carlo([1.0] * 3, 0.01, runs=4000, replications=1,
                          method="nonlinear-six", seed=4)
        assert np.abs(rep.per_axis_mean).max() <= 1e-3
        # the linear estimator carries a visible linearization bias there
        lin = monte_carlo([1.0] * 3, 0.01, runs=4000, replications=1,
                          method="six", seed=4)
        assert np.abs(lin.per_axis_mean).max() > 2e-3

    def test_pooled_is_square_averaged(self, geom):
        rep = monte_carlo([0.1] * 3, 0.01, 2000, 1, "six", seed=5)
        assert rep.pooled_std == pytest.approx(
            np.sqrt((rep.per_axis_std**2).mean()), rel=1e-12
        )

    def test_single_replication_has_no_spread(self, geom):
        rep = monte_carlo([0.1] * 3, 0.01, 100, 1, "six", seed=6)
        assert rep.std_of_std is None

    def test_validation(self, geom):
        with pytest.raises(ValueError):
            monte_carlo([0, 0, 0], 0.01, 0, 1, "six", 0)
        with pytest.raises(ValueError):
            monte_carlo([0, 0, 0], 0.01, 10, 0, "six", 0)
        with pytest.raises(ValueError):
            monte_carlo([0, 0, 0], -0.01, 10, 1, "six", 0)
        with pytest.raises(ValueError):
            monte_carlo([0, 0, 0], 0.01, 10, 1, "newton", 0)
