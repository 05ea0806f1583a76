import numpy as np
import pytest
from numpy.testing import assert_allclose

from estim import (
    DeterministicMoments,
    EstimationResult,
    FilterStepError,
    GaussianBelief,
    MomentBackendConfig,
    SystemModel,
    linear_benchmark_model,
    rts_smooth,
    run_filter,
)
from oracles import kalman_filter_smoother, random_affine_system

LINEAR = DeterministicMoments(MomentBackendConfig("linear"))


class TestRunFilter:
    def test_one_step_hand_values(self):
        # Prior N(0, 5), x' = x + w with Q = 1, z = -2 x + v with R = 10.
        # Predict: N(0, 6); measurement joint cross -12, marginal N(0, 34);
        # conditioning on z = 2 gives mean -12/17 and variance 30/17.
        model = linear_benchmark_model()
        result = run_filter(model, [[2.0]], LINEAR)
        assert result.horizon == 1
        assert_allclose(result.predicted[0].mean, [0.0], atol=1e-14)
        assert_allclose(result.predicted[0].cov, [[6.0]], rtol=1e-14)
        assert_allclose(result.predicted_meas[0].mean, [0.0], atol=1e-14)
        assert_allclose(result.predicted_meas[0].cov, [[34.0]], rtol=1e-14)
        assert_allclose(result.filtered[1].mean, [-12.0 / 17.0], rtol=1e-12)
        assert_allclose(result.filtered[1].cov, [[30.0 / 17.0]], rtol=1e-12)
        assert_allclose(result.gains[0], [[5.0 / 6.0]], rtol=1e-12)

    def test_empty_measurement_sequence_returns_prior(self):
        model = linear_benchmark_model()
        result = run_filter(model, [], LINEAR)
        assert result.horizon == 0
        assert result.filtered == (model.prior,)
        assert result.predicted == ()
        smoothed = rts_smooth(result)
        assert smoothed.smoothed == (model.prior,)

    def test_flat_measurement_sequence_accepted(self):
        model = linear_benchmark_model()
        flat = run_filter(model, [2.0, -1.0], LINEAR)
        nested = run_filter(model, [[2.0], [-1.0]], LINEAR)
        for left, right in zip(flat.filtered, nested.filtered):
            assert np.array_equal(left.mean, right.mean)

    def test_measurement_dimension_mismatch_rejected(self):
        model = linear_benchmark_model()
        with pytest.raises(ValueError, match="dimension"):
            run_filter(model, [[1.0, 2.0]], LINEAR)

    def test_failure_is_annotated_with_time_step(self):
        def transition(x, t):
            x = np.asarray(x, dtype=float)
            if t == 3:
                return np.full_like(x, np.nan)
            return x

        model = SystemModel(
            transition=transition,
            measurement=lambda x, t: np.asarray(x, dtype=float),
            Q=[[1.0]],
            R=[[1.0]],
            prior=GaussianBelief([0.0], [[1.0]]),
        )
        moments = DeterministicMoments(MomentBackendConfig("ekf"))
        with pytest.raises(FilterStepError, match="time step 3"):
            run_filter(model, [[0.0]] * 4, moments)


class TestBackendAgreementOnAffineModels:
    def test_all_backends_match_on_linear_benchmark(self):
        model = linear_benchmark_model()
        rng = np.random.default_rng(5)
        zs = rng.normal(0.0, 5.0, size=(12, 1))
        results = {
            kind: rts_smooth(
                run_filter(model, zs, DeterministicMoments(MomentBackendConfig(kind)))
            )
            for kind in ("linear", "ekf", "ukf", "ckf")
        }
        reference = results["linear"]
        for kind in ("ekf", "ukf", "ckf"):
            other = results[kind]
            for field in ("filtered", "smoothed"):
                for ref, got in zip(getattr(reference, field), getattr(other, field)):
                    assert_allclose(got.mean, ref.mean, atol=1e-8)
                    assert_allclose(got.cov, ref.cov, atol=1e-8)


class TestAgainstClassicalRecursions:
    @pytest.mark.parametrize("case", range(5))
    def test_matches_textbook_filter_and_smoother(self, case):
        rng = np.random.default_rng(1000 + case)
        model, params = random_affine_system(rng)
        horizon = 20
        zs = rng.normal(0.0, 2.0, size=(horizon, model.dim_z))
        result = rts_smooth(run_filter(model, zs, LINEAR))
        oracle = kalman_filter_smoother(
            params["F"],
            params["b"],
            params["G"],
            params["d"],
            params["Q"],
            params["R"],
            params["mu0"],
            params["P0"],
            zs,
        )
        for t in range(horizon + 1):
            assert_allclose(result.filtered[t].mean, oracle["mu_f"][t], atol=1e-10)
            assert_allclose(result.filtered[t].cov, oracle["P_f"][t], atol=1e-10)
            assert_allclose(result.smoothed[t].mean, oracle["mu_s"][t], atol=1e-10)
            assert_allclose(result.smoothed[t].cov, oracle["P_s"][t], atol=1e-10)
        for k in range(horizon):
            assert_allclose(result.predicted[k].mean, oracle["mu_p"][k], atol=1e-10)
            assert_allclose(result.predicted[k].cov, oracle["P_p"][k], atol=1e-10)
            assert_allclose(result.gains[k], oracle["gains"][k], atol=1e-10)


class TestSmoother:
    def _smoothed_linear(self, horizon=8, seed=9):
        model = linear_benchmark_model()
        rng = np.random.default_rng(seed)
        zs = rng.normal(0.0, 5.0, size=(horizon, 1))
        return rts_smooth(run_filter(model, zs, LINEAR))

    def test_one_step_hand_values(self):
        # With z = 2: smoothed mean at t = 0 is (5/6)(-12/17) = -10/17 and
        # variance 5 + (5/6)^2 (30/17 - 6) = 35/17.
        model = linear_benchmark_model()
        result = rts_smooth(run_filter(model, [[2.0]], LINEAR))
        assert_allclose(result.smoothed[0].mean, [-10.0 / 17.0], rtol=1e-12)
        assert_allclose(result.smoothed[0].cov, [[35.0 / 17.0]], rtol=1e-12)

    def test_terminal_belief_is_the_filtered_object(self):
        result = self._smoothed_linear()
        assert result.smoothed[-1] is result.filtered[-1]

    def test_smoothing_twice_changes_nothing(self):
        result = self._smoothed_linear()
        again = rts_smooth(result)
        for left, right in zip(result.smoothed, again.smoothed):
            assert np.array_equal(left.mean, right.mean)
            assert np.array_equal(left.cov, right.cov)

    def test_gain_solves_the_cross_covariance_identity(self):
        # J cov_pred must reproduce the transition cross covariance; for
        # the linear benchmark that cross is the filtered variance itself.
        result = self._smoothed_linear()
        for k in range(result.horizon):
            recovered = result.gains[k] @ result.predicted[k].cov
            assert_allclose(recovered, result.filtered[k].cov, rtol=1e-8)

    def test_filtering_never_inflates_covariance(self):
        result = self._smoothed_linear(horizon=15)
        for k in range(result.horizon):
            gap = result.predicted[k].cov - result.filtered[k + 1].cov
            eigs = np.linalg.eigvalsh(gap)
            assert eigs[0] >= -1e-8 * max(eigs[-1], 1.0)


class TestEstimationResultValidation:
    def test_length_mismatch_rejected(self):
        prior = GaussianBelief([0.0], [[1.0]])
        with pytest.raises(ValueError, match="gains"):
            EstimationResult(
                predicted=(prior,),
                filtered=(prior, prior),
                gains=(),
                predicted_meas=(prior,),
            )

    def test_empty_filtered_rejected(self):
        with pytest.raises(ValueError, match="prior"):
            EstimationResult(predicted=(), filtered=(), gains=(), predicted_meas=())

    def test_smoothed_must_terminate_in_filtered(self):
        prior = GaussianBelief([0.0], [[1.0]])
        other = GaussianBelief([1.0], [[1.0]])
        with pytest.raises(ValueError, match="final filtered"):
            EstimationResult(
                predicted=(),
                filtered=(prior,),
                gains=(),
                predicted_meas=(),
                smoothed=(other,),
            )
