import numpy as np
import pytest

from orthocal import (
    Axis,
    DoublePostureMeasurements,
    NoiseModel,
    Posture,
    ReducedMeasurements,
    SinglePostureMeasurements,
    add_noise,
    build_six_eq_system,
    build_single_posture_system,
    build_twelve_eq_system,
    coefficients,
    direct_kinematics,
    double_deviation_array,
    gauge_locations,
    leg_line_scaling,
    predict_double_posture,
    predict_single_posture,
    reduce,
    reduced_deviation_array,
    single_deviation_array,
)
from orthocal.accuracy import GAUGE_CORRELATION_BLOCK
from orthocal.measurement import _noise_double, _noise_reduced, _noise_single


class TestPredictors:
    def test_zero_offset_nullity(self, geom):
        zero = np.zeros(3)
        assert np.abs(single_deviation_array(zero, geom)).max() <= 1e-12
        assert np.abs(double_deviation_array(zero, geom)).max() <= 1e-12
        assert np.abs(reduced_deviation_array(zero, geom)).max() <= 1e-12

    def test_single_posture_pure_z_offset(self, geom):
        m = predict_single_posture([0, 0, 1], geom)
        # at the isotropic posture a pure z-offset moves the TCP by ~1 mm in z
        assert m.dz_x0 == m.dz_y0
        assert m.dz_x0 == pytest.approx(1.0, abs=2e-3)
        assert m.dz_x0 == pytest.approx(1.0000000083716278, rel=1e-10)

    def test_single_posture_x_offset(self, geom):
        m = predict_single_posture([1, 0, 0], geom)
        a1 = coefficients(geom).a1
        assert m.dz_x_plus == pytest.approx(a1, abs=2e-3)
        assert m.dz_x_plus == pytest.approx(0.19891179143714321, rel=1e-10)

    def test_double_posture_small_x_offset(self, geom):
        m = predict_double_posture([0.1, 0, 0], geom)
        c1 = coefficients(geom).c1
        assert m.dy_x_plus == pytest.approx(c1 * 0.1, abs=1e-4)
        assert m.dy_x_plus == pytest.approx(0.013672100603747664, rel=1e-9)

    def test_double_posture_matches_linear_model_at_unit_offsets(self, geom):
        dr = np.array([1.0, 1.0, 1.0])
        nonlinear = double_deviation_array(dr, geom)
        linear = build_twelve_eq_system(geom).design_matrix @ dr
        # second-order error at 1 mm offsets stays below a few microns
        assert np.abs(nonlinear - linear).max() <= 5e-3
        assert np.abs(nonlinear - linear).max() > 1e-4

    @pytest.mark.parametrize(
        "deviation_fn, builder",
        [
            (single_deviation_array, build_single_posture_system),
            (double_deviation_array, build_twelve_eq_system),
            (reduced_deviation_array, build_six_eq_system),
        ],
    )
    def test_linear_consistency_at_small_offsets(self, geom, deviation_fn, builder):
        design = builder(geom).design_matrix
        rng = np.random.default_rng(21)
        for _ in range(10):
            dr = rng.uniform(-0.1, 0.1, 3)
            err = np.abs(deviation_fn(dr, geom) - design @ dr).max()
            assert err <= 1e-3

    def test_error_grows_quadratically(self, geom):
        design = build_twelve_eq_system(geom).design_matrix
        u = np.array([1.0, -0.8, 0.6])

        def err(scale):
            dr = scale * u
            return np.abs(double_deviation_array(dr, geom) - design @ dr).max()

        e01, e05, e10 = err(0.1), err(0.5), err(1.0)
        assert 20 < e05 / e01 < 32  # ~25 for a quadratic remainder
        assert 3.2 < e10 / e05 < 4.8  # ~4

    def test_offset_bound_enforced(self, geom):
        with pytest.raises(ValueError):
            double_deviation_array([40.0, 0, 0], geom)

    def test_batch_shape(self, geom):
        drs = np.random.default_rng(0).uniform(-1, 1, (7, 3))
        batch = double_deviation_array(drs, geom)
        assert batch.shape == (7, 12)
        for i, dr in enumerate(drs):
            np.testing.assert_allclose(batch[i], double_deviation_array(dr, geom), atol=0)


class TestReduce:
    def test_zeros(self):
        m = DoublePostureMeasurements(*([0.0] * 12))
        assert reduce(m).as_array().tolist() == [0.0] * 6

    def test_definition(self):
        m = DoublePostureMeasurements(
            dx_y_plus=0.0, dy_x_plus=0.3, dx_y_minus=0.0, dy_x_minus=0.1,
            dy_z_plus=0.0, dz_y_plus=0.0, dy_z_minus=0.0, dz_y_minus=0.0,
            dx_z_plus=0.0, dz_x_plus=0.0, dx_z_minus=0.0, dz_x_minus=0.0,
        )
        assert reduce(m).dy_x == pytest.approx(0.2)

    def test_reduced_prediction_consistency(self, geom):
        dr = [0.5, -0.25, 0.75]
        via_reduce = reduce(predict_double_posture(dr, geom)).as_array()
        direct = reduced_deviation_array(dr, geom)
        np.testing.assert_allclose(via_reduce, direct, atol=0)

    def test_reduced_matches_linear_model_second_order(self, geom):
        dr = np.array([0.05, -0.08, 0.03])
        design = build_six_eq_system(geom).design_matrix
        red = reduce(predict_double_posture(dr, geom)).as_array()
        assert np.abs(red - design @ dr).max() <= 1e-4


class TestGauges:
    def test_nominal_gauge_locations(self, geom):
        gx, gy, gz = gauge_locations([0, 0, 0], geom)
        np.testing.assert_allclose(gx.position, [155.125, 0, 0], atol=1e-12)
        np.testing.assert_allclose(gy.position, [0, 155.125, 0], atol=1e-12)
        np.testing.assert_allclose(gz.position, [0, 0, 155.125], atol=1e-12)

    def test_gauge_location_uses_exact_isotropic_tcp(self, geom):
        dr = np.array([1.0, 1.0, 1.0])
        p0, _ = direct_kinematics(geom.L + dr, [0, 0, 0], geom)
        gx, gy, gz = gauge_locations(dr, geom)
        assert gx.position[0] == pytest.approx(155.125 + (p0[0] + 1.0) / 2, abs=1e-12)
        assert gx.position[1] == pytest.approx(p0[1] / 2, abs=1e-12)
        assert gy.position[1] == pytest.approx(155.125 + (p0[1] + 1.0) / 2, abs=1e-12)
        assert gz.position[2] == pytest.approx(155.125 + (p0[2] + 1.0) / 2, abs=1e-12)

    def test_gauge_location_linearized(self, geom):
        # a small x-offset moves the Y-leg gauge x-coordinate by about half
        gx, gy, gz = gauge_locations([0.1, 0, 0], geom)
        assert gy.position[0] == pytest.approx(0.05, abs=1e-3)

    def test_scaling_at_displacement_postures(self, geom):
        mu_max = leg_line_scaling(Posture.max(Axis.X), Axis.X, [0, 0, 0], geom)
        mu_min = leg_line_scaling(Posture.min(Axis.X), Axis.X, [0, 0, 0], geom)
        mu_iso = leg_line_scaling(Posture.isotropic(), Axis.X, [0, 0, 0], geom)
        assert mu_max == pytest.approx(0.693392425463336, rel=1e-14)
        assert mu_min == pytest.approx(0.17767929089443996, rel=1e-14)
        assert mu_iso == 0.5

    def test_scaling_stays_in_unit_interval(self, geom):
        rng = np.random.default_rng(5)
        for _ in range(20):
            dr = rng.uniform(-2, 2, 3)
            for axis in Axis:
                for posture in (Posture.max(axis), Posture.min(axis), Posture.isotropic()):
                    mu = leg_line_scaling(posture, axis, dr, geom)
                    assert 0.0 < mu < 1.0

    def test_mismatched_leg_rejected(self, geom):
        with pytest.raises(ValueError):
            leg_line_scaling(Posture.max(Axis.X), Axis.Y, [0, 0, 0], geom)

    def test_gauge_shift_hook_default_zero(self, geom):
        dr = [0.4, -0.2, 0.6]
        base = double_deviation_array(dr, geom)
        shifted = double_deviation_array(dr, geom, gauge_shift=[0.0, 0.0, 0.0])
        np.testing.assert_allclose(base, shifted, atol=0)
        perturbed = double_deviation_array(dr, geom, gauge_shift=[1.0, 0.0, 0.0])
        assert np.abs(perturbed - base).max() > 0
        # placement errors barely matter compared to the signal
        assert np.abs(perturbed - base).max() < 1e-2 * np.abs(base).max()


class TestNoise:
    def test_zero_sigma_identity(self, geom):
        m = predict_double_posture([1, 1, 1], geom)
        assert add_noise(m, NoiseModel(sigma=0.0, seed=1)) is m

    def test_same_seed_reproducible(self, geom):
        m = reduce(predict_double_posture([1, 1, 1], geom))
        nm = NoiseModel(sigma=0.05, seed=99)
        a = add_noise(m, nm)
        b = add_noise(m, nm)
        assert a == b
        c = add_noise(m, NoiseModel(sigma=0.05, seed=100))
        assert a != c

    def test_all_shapes_supported(self, geom):
        nm = NoiseModel(sigma=0.01, seed=5)
        for m in (
            predict_single_posture([0.1, 0.1, 0.1], geom),
            predict_double_posture([0.1, 0.1, 0.1], geom),
            reduce(predict_double_posture([0.1, 0.1, 0.1], geom)),
        ):
            noisy = add_noise(m, nm)
            assert type(noisy) is type(m)
            assert np.all(noisy.as_array() != m.as_array())

    def test_reduced_channel_std(self):
        # differences of two independent readings: std = sqrt(2) * sigma
        rng = np.random.default_rng(123)
        draws = _noise_reduced(rng, 0.01, (10000,))
        stds = draws.std(axis=0, ddof=1)
        np.testing.assert_allclose(stds, np.sqrt(2) * 0.01, rtol=0.03)

    def test_single_channel_std(self):
        rng = np.random.default_rng(124)
        draws = _noise_single(rng, 0.01, (10000,))
        np.testing.assert_allclose(draws.std(axis=0, ddof=1), np.sqrt(2) * 0.01, rtol=0.03)

    def test_double_noise_covariance_structure(self):
        # empirical covariance of the 12-vector noise must match the
        # block-correlated pattern from the shared isotropic readings
        sigma = 0.01
        rng = np.random.default_rng(2024)
        draws = _noise_double(rng, sigma, (100000,))
        emp = np.cov(draws.T)
        G = np.kron(np.eye(3), GAUGE_CORRELATION_BLOCK)
        assert np.abs(emp - sigma**2 * G).max() <= 0.05 * sigma**2 * G.max()

    def test_reduction_cancels_isotropic_noise(self):
        # reducing the 12-vector noise gives variance 2 sigma^2 channels
        sigma = 0.01
        rng = np.random.default_rng(77)
        draws = _noise_double(rng, sigma, (100000,))
        pairs = ((0, 2), (1, 3), (4, 6), (5, 7), (8, 10), (9, 11))
        red = np.stack([draws[:, i] - draws[:, j] for i, j in pairs], axis=1)
        emp = np.cov(red.T)
        assert np.abs(emp - 2 * sigma**2 * np.eye(6)).max() <= 0.1 * sigma**2

    def test_repetition_averaging_shrinks_noise(self, geom):
        rng_std = []
        for reps in (1, 4):
            vals = []
            for seed in range(300):
                m = add_noise(
                    ReducedMeasurements(0, 0, 0, 0, 0, 0),
                    NoiseModel(sigma=0.1, seed=seed),
                    repetitions=reps,
                )
                vals.append(m.as_array())
            rng_std.append(np.std(np.asarray(vals)))
        assert rng_std[1] == pytest.approx(rng_std[0] / 2, rel=0.15)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            NoiseModel(sigma=-0.1, seed=0)
        with pytest.raises(ValueError):
            add_noise(ReducedMeasurements(0, 0, 0, 0, 0, 0), NoiseModel(0.1, 0), repetitions=0)


class TestMeasurementTypes:
    def test_array_round_trip(self):
        arr = np.arange(12.0)
        m = DoublePostureMeasurements.from_array(arr)
        np.testing.assert_allclose(m.as_array(), arr, atol=0)
        arr6 = np.arange(6.0)
        assert SinglePostureMeasurements.from_array(arr6).as_array().tolist() == arr6.tolist()
        assert ReducedMeasurements.from_array(arr6).as_array().tolist() == arr6.tolist()
