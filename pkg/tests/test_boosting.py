import numpy as np
import pandas as pd
import pytest
from sklearn.base import clone

from eblr import (Covariate, DataError, EBLRRegressor, FitError,
                  PredictionError, apply_rule, fit_eblr, fit_ols, nrmse,
                  predict_point, predict_quantiles, prediction_interval,
                  split_train_test, vertical_matrix)

from conftest import make_panel


class TestSyntheticLoop:
    def test_first_rule_is_weekend_promo_conjunction(self, fitted_small):
        assert fitted_small.rules_[0].canonical() == "isPromotion=1 & isWeekend=1"

    def test_learned_rules_cover_the_remaining_day_types(self, fitted_small):
        canon = [r.canonical() for r in fitted_small.rules_]
        assert canon[1:] == ["isPromotion=0 & isWeekend=1",
                             "isPromotion=1 & isWeekend=0"]

    def test_train_nrmse_non_increasing_and_front_loaded(self, fitted_small):
        curve = [fitted_small.base_nrmse_] + [
            rec.train_nrmse for rec in fitted_small.iteration_log_]
        diffs = [a - b for a, b in zip(curve, curve[1:])]
        assert all(d >= -1e-12 * curve[0] for d in diffs)
        assert diffs[0] >= max(diffs[1:])  # the first fix is the major one

    def test_log_length_bounded_by_f_max(self, fitted_small):
        assert len(fitted_small.iteration_log_) <= 5

    def test_rules_distinct_and_fire_on_strict_subsets(self, synth_small, fitted_small):
        M = vertical_matrix(synth_small)
        seen = set()
        for rule in fitted_small.rules_:
            seen.add(rule.canonical())
            fired = apply_rule(rule, M)
            assert 0 < fired.sum() < len(fired)
        assert len(seen) == len(fitted_small.rules_)

    def test_holdout_nrmse_within_reproduction_band(self, synth_full):
        train, test = split_train_test(synth_full, 14)
        model = fit_eblr(train, f_max=5)
        pp = predict_point(model, test)
        err = nrmse(test.frame["target"].to_numpy(), pp["point"].to_numpy())
        assert err <= 0.06


class TestStopping:
    def test_perfect_linear_fit_yields_zero_rules(self):
        x = np.arange(40.0)
        ds = make_panel([(int(t), 3.0 + 2.0 * t, float(t)) for t in x],
                        [Covariate("x", "numeric")])
        model = fit_eblr(ds, initial_features="raw", f_max=5)
        assert model.rules_ == []
        assert model.iteration_log_ == []

    def test_all_zero_shrinkage_stops_on_duplicate_rule(self, synth_small):
        # a penalty beyond lambda_max keeps every coefficient at zero, so the
        # residuals never change and the second iteration re-selects the same
        # leaf; the loop must stop with the single rule
        model = fit_eblr(synth_small, base_learner="lasso", lam=1e12, f_max=5)
        assert len(model.rules_) == 1

    def test_min_relative_improvement_stop(self, synth_small):
        eager = fit_eblr(synth_small, f_max=5)
        stopped = fit_eblr(synth_small, f_max=5, min_relative_improvement=0.5)
        assert len(stopped.rules_) < len(eager.rules_)
        assert len(stopped.rules_) >= 1

    def test_exactly_k_rules_without_early_stop(self, rng):
        # smooth nonlinear signal over a numeric covariate keeps the tree
        # splittable, so every iteration generates a fresh rule
        t = np.arange(300)
        x = rng.normal(size=300)
        y = np.sin(3.0 * x) * 10.0 + rng.normal(size=300, scale=0.05) + 20.0
        ds = make_panel(list(zip(t.tolist(), y.tolist(), x.tolist())),
                        [Covariate("x", "numeric")])
        model = fit_eblr(ds, f_max=3, eta=0.0)
        assert len(model.rules_) == 3

    def test_no_covariates_yields_intercept_model(self):
        ds = make_panel([(t, float(t % 3)) for t in range(20)], [])
        model = fit_eblr(ds, f_max=5)
        assert model.rules_ == []
        assert model.model_.column_names == []


class TestEstimatorApi:
    def test_sklearn_params_roundtrip(self):
        est = EBLRRegressor(f_max=7, eta=0.01, base_learner="lasso")
        params = est.get_params()
        assert params["f_max"] == 7
        cloned = clone(est)
        assert cloned.get_params() == params
        est.set_params(f_max=2)
        assert est.f_max == 2

    def test_fit_predict_on_dataframe(self, rng):
        X = pd.DataFrame({
            "isWeekend": rng.integers(0, 2, size=200).astype(float),
            "isPromo": rng.integers(0, 2, size=200).astype(float),
        })
        y = 5.0 + 4.0 * X["isWeekend"] * X["isPromo"] + rng.normal(size=200, scale=0.1)
        est = EBLRRegressor(f_max=3).fit(X, y.to_numpy())
        assert est.rules_[0].canonical() == "isPromo=1 & isWeekend=1"
        pred = est.predict(X)
        assert nrmse(y.to_numpy(), pred) < 0.05
        # name-based matching: permuted columns give identical predictions
        np.testing.assert_array_equal(est.predict(X[["isPromo", "isWeekend"]]), pred)

    def test_fit_on_ndarray_synthesises_names(self, rng):
        X = rng.normal(size=(50, 2))
        y = X @ np.array([1.0, -1.0]) + 3.0
        est = EBLRRegressor(f_max=1).fit(X, y)
        assert list(est.feature_names_in_) == ["x0", "x1"]
        assert est.predict(X).shape == (50,)

    def test_param_validation(self, synth_small):
        with pytest.raises(FitError):
            fit_eblr(synth_small, base_learner="gbm")
        with pytest.raises(FitError):
            fit_eblr(synth_small, f_max=-1)
        with pytest.raises(FitError):
            fit_eblr(synth_small, initial_features=["nope"])
        with pytest.raises(FitError):
            fit_eblr(synth_small, estimator=EBLRRegressor(), f_max=2)

    def test_unfitted_predict_raises(self, synth_small):
        with pytest.raises(PredictionError, match="not fitted"):
            EBLRRegressor().predict(vertical_matrix(synth_small))

    def test_f_max_zero_is_a_plain_linear_fit(self, synth_small):
        model = fit_eblr(synth_small, f_max=0)
        direct = fit_ols(vertical_matrix(synth_small))
        assert model.rules_ == []
        np.testing.assert_allclose(model.model_.coefficients, direct.coefficients)

    def test_initial_features_raw_starts_from_linear_fit(self, synth_small):
        plain = fit_eblr(synth_small, f_max=5)
        seeded = fit_eblr(synth_small, f_max=5, initial_features="raw")
        assert seeded.base_nrmse_ < plain.base_nrmse_

    def test_include_raw_at_end_false_keeps_rule_columns_only(self, synth_small):
        model = fit_eblr(synth_small, f_max=5, include_raw_at_end=False)
        assert all(name.startswith("rule:") for name in model.model_.column_names)

    def test_row_level_quantile_and_interval_methods(self, synth_small, fitted_small):
        M = vertical_matrix(synth_small)
        q = fitted_small.predict_quantiles(M, (0.1, 0.5, 0.9))
        assert q.shape == (synth_small.n_rows, 3)
        assert np.all(np.diff(q, axis=1) >= 0)
        lower, upper = fitted_small.prediction_interval(M, alpha=0.8)
        np.testing.assert_array_equal(lower, q[:, 0])
        np.testing.assert_array_equal(upper, q[:, 2])

    def test_predict_distributions_median_is_point_plus_median_residual(self, synth_small, fitted_small):
        M = vertical_matrix(synth_small)
        dists = fitted_small.predict_distributions(M, (0.5,))
        med = np.median(np.sort(fitted_small.training_residuals_))
        points = fitted_small.predict(M)
        for d, p in zip(dists[:20], points[:20]):
            assert d.point == pytest.approx(p)
            assert dict(d.quantiles)[0.5] == pytest.approx(p + med)


class TestLassoBase:
    def test_lasso_learner_recovers_the_same_first_rule(self, synth_small):
        model = fit_eblr(synth_small, base_learner="lasso", f_max=5)
        assert model.rules_[0].canonical() == "isPromotion=1 & isWeekend=1"

    def test_lasso_log_non_increasing_within_slack(self, synth_small):
        model = fit_eblr(synth_small, base_learner="lasso", f_max=5, lam=0.5)
        curve = [model.base_nrmse_] + [r.train_nrmse for r in model.iteration_log_]
        assert all(b <= a * (1 + 1e-6) for a, b in zip(curve, curve[1:]))


class TestPanelPrediction:
    def test_zero_rule_intercept_model_is_constant(self):
        ds = make_panel([(t, 6.0 + (t % 2)) for t in range(30)], [])
        model = fit_eblr(ds, f_max=3)
        out = predict_point(model, ds)
        np.testing.assert_allclose(out["point"], np.full(30, 6.5))

    def test_row_order_invariance(self, synth_small, fitted_small):
        train, test = split_train_test(synth_small, 14)
        shuffled = test.with_frame(test.frame.sample(frac=1.0, random_state=5))
        a = predict_point(fitted_small, test)
        b = predict_point(fitted_small, shuffled)
        pd.testing.assert_frame_equal(a, b)

    def test_missing_covariate_named_in_error(self, fitted_small):
        ds = make_panel([(t, 1.0) for t in range(10)], [])
        with pytest.raises(DataError, match="isWeekend"):
            predict_point(fitted_small, ds)

    def test_quantile_frame_monotone_and_constant_width(self, synth_small, fitted_small):
        _, test = split_train_test(synth_small, 14)
        out = predict_quantiles(fitted_small, test)
        cols = ["q05", "q25", "q50", "q75", "q95"]
        assert list(out.columns) == ["series_id", "timestamp", "point"] + cols
        values = out[cols].to_numpy()
        assert np.all(np.diff(values, axis=1) >= 0)
        widths = values[:, -1] - values[:, 0]
        assert np.allclose(widths, widths[0])

    def test_interval_endpoints_match_quantiles(self, synth_small, fitted_small):
        _, test = split_train_test(synth_small, 14)
        band = prediction_interval(fitted_small, test, alpha=0.9)
        q = predict_quantiles(fitted_small, test, (0.05, 0.95))
        np.testing.assert_array_equal(band["lower"].to_numpy(), q["q05"].to_numpy())
        np.testing.assert_array_equal(band["upper"].to_numpy(), q["q95"].to_numpy())

    def test_training_self_coverage_of_ninety_percent_interval(self, synth_small, fitted_small):
        band = prediction_interval(fitted_small, synth_small, alpha=0.9)
        y = synth_small.frame["target"].to_numpy()
        covered = np.mean((y >= band["lower"].to_numpy())
                          & (y <= band["upper"].to_numpy()))
        assert covered == pytest.approx(0.9, abs=0.03)

    def test_calendar_expansion_round_trip(self, synth_small):
        train, test = split_train_test(synth_small, 14)
        model = fit_eblr(train, expand_calendar=True, f_max=3)
        assert model.calendar_expanded_
        assert any(c.name == "day_of_week" for c in model.schema_)
        out = predict_point(model, test)  # future gets the same expansion
        assert len(out) == 14
        assert np.all(np.isfinite(out["point"].to_numpy()))

    def test_symmetric_residuals_give_symmetric_interval(self):
        ds = make_panel([(t, 10.0 + (-1.0) ** t) for t in range(40)], [])
        model = fit_eblr(ds, f_max=0, include_raw_at_end=False)
        band = prediction_interval(model, ds, alpha=0.5)
        mid = (band["lower"] + band["upper"]) / 2.0
        np.testing.assert_allclose(mid, band["point"], atol=1e-9)
