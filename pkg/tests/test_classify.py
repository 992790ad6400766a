import numpy as np
import pytest

from sislab import models
from sislab.classify import (
    Regime,
    estimate_lambda_star,
    predict_regime,
    verify_outcome,
)
from sislab.mesh import Field, build_grid, integrate
from sislab.models import ModelSpec, Variant
from sislab.spectral import principal_eigenvalue


EXPECTED_REGIMES = {
    "sim1a": Regime.T32_EXTINCTION,
    "sim1b": Regime.T32_ENDEMIC_UNIFORM,
    "sim2a": Regime.T37_EXTINCTION_UNIFORM,
    "sim2b": Regime.T37_CONCENTRATION,
    "sim2c": Regime.T37_CONCENTRATION,
    "sim3a": Regime.T42_EXTINCTION,
    "sim3b": Regime.T42_ENDEMIC,
    "sim3c": Regime.T43_SUBSEQ_EXTINCTION,
    "sim4a": Regime.T46_PERSISTENCE,
    "sim4b": Regime.T46_PERSISTENCE,
}


class TestPredictions:
    @pytest.mark.parametrize("name,regime", sorted(EXPECTED_REGIMES.items()))
    def test_preset_regimes(self, preset_setup, name, regime):
        spec, grid, S0, I0 = preset_setup(name)
        pred = predict_regime(spec, S0, I0, compute_threshold=False)
        assert pred.regime is regime

    def test_endemic_level_for_the_large_population_case(self, preset_setup):
        spec, grid, S0, I0 = preset_setup("sim1b")
        pred = predict_regime(spec, S0, I0)
        assert float(pred.predicted_I) == pytest.approx(2.5, abs=1e-3)
        assert isinstance(pred.predicted_S, Field)

    def test_concentration_targets(self, preset_setup):
        spec, grid, S0, I0 = preset_setup("sim2b")
        pred = predict_regime(spec, S0, I0)
        assert pred.predicted_I_mass == pytest.approx(np.pi - 0.5, abs=1e-6)
        assert grid.nodes[pred.min_indices] == pytest.approx([0.5])
        spec, grid, S0, I0 = preset_setup("sim2c")
        pred = predict_regime(spec, S0, I0)
        assert grid.nodes[pred.min_indices] == pytest.approx([0.125, 0.625])

    def test_persistence_level_closes_the_mass_balance(self, preset_setup):
        spec, grid, S0, I0 = preset_setup("sim4a")
        pred = predict_regime(spec, S0, I0)
        S_star = float(pred.predicted_S)
        assert S_star == pytest.approx(63 / 19, rel=1e-3)
        total = S_star * grid.length + integrate(pred.predicted_I)
        assert total == pytest.approx(3.5, rel=1e-9)

    def test_endemic_uniform_level_matches_recomputation(self, preset_setup):
        spec, grid, S0, I0 = preset_setup("sim3b")
        pred = predict_regime(spec, S0, I0)
        bv, gv = spec.beta.values, spec.gamma.values
        level = 3.5 / integrate(Field(grid, bv / (bv - gv)))
        assert float(pred.predicted_I) == pytest.approx(level, rel=1e-12)
        assert float(pred.predicted_I) == pytest.approx(1.1159, abs=2e-4)

    def test_reciprocal_gap_heuristic_notes_are_reported(self, preset_setup):
        spec, grid, S0, I0 = preset_setup("sim3c")
        pred = predict_regime(spec, S0, I0)
        assert any("capped quadrature" in n for n in pred.notes)

    def test_full_variant_is_rejected(self):
        g = build_grid(0, 1, 11)
        spec = ModelSpec(Variant.FULL, Field.constant(g, 1.0),
                         Field.constant(g, 1.0), d_S=1.0, d_I=1.0)
        with pytest.raises(ValueError, match="degenerate"):
            predict_regime(spec, Field.constant(g, 1.0), Field.constant(g, 1.0))

    def test_small_population_beats_threshold_logic(self, preset_setup):
        spec, grid, S0, I0 = preset_setup("sim1a")
        pred = predict_regime(spec, S0, I0, compute_threshold=False)
        assert pred.regime is Regime.T32_EXTINCTION

    def test_undecided_band_is_indeterminate(self, preset_setup):
        # sim1c coefficients with a population inside (int r, N*): no decision
        # rule pins the outcome, which is exactly what the sweep probes
        spec, grid, S0, I0 = preset_setup("sim1c")
        small_I0 = Field(grid, np.maximum(0.80 + np.cos(np.pi * grid.nodes), 0.0))
        pred = predict_regime(spec, S0, small_I0)
        assert pred.regime is Regime.INDETERMINATE
        assert any("critical population" in n for n in pred.notes)

    def test_decision_table_is_total_on_random_inputs(self):
        g = build_grid(0, 1, 41)
        rng = np.random.default_rng(0)
        variants = [Variant.MASS_ACTION_DS0, Variant.MASS_ACTION_DI0,
                    Variant.STD_INCIDENCE_DS0, Variant.STD_INCIDENCE_DI0]
        for k in range(24):
            variant = variants[k % 4]
            base = 0.5 + rng.uniform(0, 2)
            beta = Field(g, base + rng.uniform(0, base - 0.2)
                         * np.sin((k + 1) * g.nodes))
            gamma = Field(g, 0.3 + rng.uniform(0, 2))
            d_S, d_I = (0.0, 1.0) if variant.locks_s else (1.0, 0.0)
            spec = ModelSpec(variant, beta, gamma, d_S=d_S, d_I=d_I)
            S0 = Field(g, rng.uniform(0.0, 2.0, g.nx))
            I0 = Field(g, np.maximum(rng.uniform(-0.5, 1.0, g.nx), 0.0))
            if not (I0.values > 0).any():
                continue
            pred = predict_regime(spec, S0, I0, compute_threshold=False)
            assert isinstance(pred.regime, Regime)


class TestLambdaStarEstimate:
    def test_range_and_reconstruction(self, preset_run, preset_setup):
        spec, grid, S0, I0 = preset_setup("sim1a")
        traj = preset_run("sim1a")
        r = spec.risk_ratio()
        lam = estimate_lambda_star(traj, r, spec.beta)
        assert 0.0 < lam.min() and lam.max() <= 1.0
        rebuilt = lam.values * S0.values + (1 - lam.values) * r.values
        assert np.abs(traj.final.S.values - rebuilt).max() <= 1e-10 * S0.max()

    def test_extinction_run_certificate(self, preset_run, preset_setup):
        # the exposure factor of a died-out run certifies a nonpositive
        # constrained eigenvalue up to finite-horizon truncation
        spec, grid, S0, I0 = preset_setup("sim1a")
        traj = preset_run("sim1a")
        lam = estimate_lambda_star(traj, spec.risk_ratio(), spec.beta)
        h = Field(grid, spec.beta.values * lam.values
                  * (S0.values - spec.risk_ratio().values))
        assert principal_eigenvalue(spec.d_I, h).sigma <= 1e-3

    def test_wrong_variant_is_rejected(self, preset_run, preset_setup):
        spec, grid, S0, I0 = preset_setup("sim2b")
        traj = preset_run("sim2b")
        with pytest.raises(ValueError):
            estimate_lambda_star(traj, spec.risk_ratio(), spec.beta)


class TestVerifyOutcome:
    def test_endemic_uniform_pass(self, preset_run, preset_setup):
        spec, grid, S0, I0 = preset_setup("sim1b")
        traj = preset_run("sim1b")
        report = verify_outcome(traj, predict_regime(spec, S0, I0), tol=0.01)
        assert report.passed
        assert report.measured_errors["I_mass_rel"] <= 0.01

    def test_concentration_pass_with_mass_tolerance(self, preset_run, preset_setup):
        spec, grid, S0, I0 = preset_setup("sim2b")
        traj = preset_run("sim2b")
        report = verify_outcome(traj, predict_regime(spec, S0, I0), tol=0.02)
        assert report.passed
        assert report.measured_errors["I_mass_rel"] <= 0.02
        assert report.measured_errors["concentration_shortfall"] <= 0.1

    def test_endemic_constant_pass(self, preset_run, preset_setup):
        spec, grid, S0, I0 = preset_setup("sim3b")
        traj = preset_run("sim3b")
        report = verify_outcome(traj, predict_regime(spec, S0, I0), tol=0.01)
        assert report.passed
        assert report.measured_errors["I_uniform_rel"] <= 0.01

    def test_indeterminate_is_reported_without_verdict(self, preset_run, preset_setup):
        spec, grid, S0, I0 = preset_setup("sim1c")
        traj = preset_run("sim1c")
        from sislab.classify import RegimePrediction

        pred = RegimePrediction(Regime.INDETERMINATE)
        report = verify_outcome(traj, pred, tol=0.01)
        assert report.passed is None
        assert report.measured_errors == {}
        assert any("no verdict" in n for n in report.notes)

    def test_failure_is_reported_not_hidden(self, preset_run, preset_setup):
        spec, grid, S0, I0 = preset_setup("sim1b")
        traj = preset_run("sim1b")
        pred = predict_regime(spec, S0, I0)
        strict = verify_outcome(traj, pred, tol=1e-16)
        assert strict.passed is False
