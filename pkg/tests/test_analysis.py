"""Diagnostics: batch-variance probe, contraction fitting, tracking
recursion checks, complexity sweeps."""

import numpy as np
import pytest

from ttsa.analysis import (
    RateFit,
    _loglog_fit,
    batch_variance_probe,
    complexity_sweep,
    fit_contraction,
    tracking_recursion_check,
)
from ttsa.config import TwoTimescaleConfig
from ttsa.errors import InsufficientSignalError, ValidationError
from ttsa.harness import LinearSweepRunner, behavior_mixing
from ttsa.linear_tdc import build_linear_exact, run_linear_tdc
from ttsa.mdp import (
    MdpModel,
    fit_geometric_mixing,
    induced_chain,
    make_garnet,
    stationary_distribution,
    uniform_policy,
)
from ttsa.rng import make_rng


class TestVarianceProbe:
    def test_constant_map_gives_zero(self, twostate_setup):
        X = np.ones((2, 3))
        res = batch_variance_probe(twostate_setup.chain, twostate_setup.mu, X,
                                   [10, 100], reps=40, seed=0, mixing=twostate_setup.mixing)
        assert res.empirical == [0.0, 0.0]
        assert res.satisfied()

    def test_iid_chain_matches_variance_over_m(self, twostate_setup):
        mu = twostate_setup.mu
        chain = np.tile(mu, (2, 1))
        mixing = fit_geometric_mixing(chain, mu, 20)
        X = np.array([[1.0], [0.0]])
        m = 50
        res = batch_variance_probe(chain, mu, X, [m], reps=4000, seed=1, mixing=mixing)
        var = float(mu @ (X[:, 0] - mu @ X[:, 0]) ** 2)
        assert abs(res.empirical[0] - var / m) <= 3.0 * res.std_err[0]
        assert res.empirical[0] <= res.bound[0]

    def test_twostate_bound_and_slope(self, twostate_setup):
        X = np.eye(2)
        batch_sizes = [10, 30, 100, 300, 1000]
        res = batch_variance_probe(twostate_setup.chain, twostate_setup.mu, X,
                                   batch_sizes, reps=600, seed=2,
                                   mixing=twostate_setup.mixing)
        assert res.satisfied(3.0)
        fit = _loglog_fit(batch_sizes, res.empirical)
        assert -1.15 <= fit.slope <= -0.85

    def test_bound_claim_validated_against_cx(self, twostate_setup):
        X = 0.5 * np.eye(2)
        res = batch_variance_probe(twostate_setup.chain, twostate_setup.mu, X,
                                   [20], reps=50, seed=3, mixing=twostate_setup.mixing)
        assert res.C_x == pytest.approx(0.5)
        assert res.bound[0] == pytest.approx(
            8 * 0.25 * twostate_setup.mixing.factor / 20)

    def test_nonstationary_start_mode(self, twostate_setup):
        X = np.eye(2)
        res = batch_variance_probe(twostate_setup.chain, twostate_setup.mu, X,
                                   [100], reps=400, seed=4,
                                   mixing=twostate_setup.mixing,
                                   stationary_start=False)
        assert res.empirical[0] <= res.bound[0]


class TestFitContraction:
    def test_exact_geometric(self):
        fit = fit_contraction(0.9 ** np.arange(100))
        assert abs(fit.factor - 0.9) <= 1e-6

    def test_geometric_with_floor(self):
        fit = fit_contraction(0.9 ** np.arange(100) + 0.01)
        assert abs(fit.factor - 0.9) <= 1e-3

    def test_scale_invariance(self):
        series = 0.93 ** np.arange(80) + 0.001
        a = fit_contraction(series).factor
        b = fit_contraction(123.456 * series).factor
        assert abs(a - b) <= 1e-12

    def test_floor_dominated_raises(self):
        with pytest.raises(InsufficientSignalError):
            fit_contraction(np.full(50, 0.3))

    def test_too_short_raises(self):
        with pytest.raises(InsufficientSignalError):
            fit_contraction(0.9 ** np.arange(20), burn_in=19)

    def test_r_squared_is_bounded(self):
        rng = make_rng(5)
        series = 0.9 ** np.arange(60) * np.exp(0.05 * rng.standard_normal(60))
        fit = fit_contraction(series)
        assert 0.0 <= fit.r_squared <= 1.0

    def test_real_trace_beats_half_certified_rate(self, linear_setup):
        traces = [
            run_linear_tdc(linear_setup.mdp, linear_setup.behavior, linear_setup.target,
                           linear_setup.features,
                           TwoTimescaleConfig(alpha=0.5, beta=1.0, batch_size=2000,
                                              iterations=300, seed=s),
                           exact=linear_setup.exact)
            for s in range(20)
        ]
        D = np.mean([t.delta() for t in traces], axis=0)
        fit = fit_contraction(D, burn_in=1)
        rate = min(linear_setup.exact.lambda1 * 0.5, linear_setup.exact.lambda2 * 1.0)
        assert fit.factor <= 1.0 - rate / 16.0


class TestRecursionCheck:
    def _linear_constants(self, linear_setup):
        exact = linear_setup.exact
        return dict(lambda1=exact.lambda1, lambda2=exact.lambda2,
                    rho_max=exact.rho_max, R_theta=exact.R_theta, r_max=exact.r_max)

    def test_zero_reward_runs_fully_satisfied(self, linear_setup):
        mdp = linear_setup.mdp
        zero = MdpModel.from_tensors(mdp.transition, np.zeros_like(mdp.reward), mdp.gamma)
        exact = build_linear_exact(zero, linear_setup.behavior, linear_setup.target,
                                   linear_setup.features)
        cfg = TwoTimescaleConfig(alpha=0.01, beta=0.02, batch_size=20, iterations=40, seed=0)
        traces = [
            run_linear_tdc(zero, linear_setup.behavior, linear_setup.target,
                           linear_setup.features, cfg.replace(seed=s), exact=exact)
            for s in range(3)
        ]
        consts = dict(lambda1=exact.lambda1, lambda2=exact.lambda2,
                      rho_max=exact.rho_max, R_theta=exact.R_theta, r_max=exact.r_max)
        report = tracking_recursion_check(traces, consts, "linear",
                                          linear_setup.mixing, cfg)
        assert report.satisfied_fraction == 1.0
        assert report.worst_violation == 0.0

    def test_compliant_config_satisfies(self, linear_setup):
        exact = linear_setup.exact
        beta = min(1.0 / (8 * exact.lambda2), exact.lambda2 / 4) * 0.9
        alpha = min(1.0 / (8 * exact.lambda1) * 0.9, beta)
        cfg = TwoTimescaleConfig(alpha=alpha, beta=beta, batch_size=500,
                                 iterations=100, seed=0)
        traces = [
            run_linear_tdc(linear_setup.mdp, linear_setup.behavior, linear_setup.target,
                           linear_setup.features, cfg.replace(seed=s), exact=exact)
            for s in range(20)
        ]
        report = tracking_recursion_check(traces, self._linear_constants(linear_setup),
                                          "linear", linear_setup.mixing, cfg)
        assert report.satisfied_fraction >= 0.9
        assert report.stepsize_compliant

    def test_oversized_alpha_flagged_and_violating(self, linear_setup):
        exact = linear_setup.exact
        beta = min(1.0 / (8 * exact.lambda2), exact.lambda2 / 4) * 0.9
        alpha = min(1.0 / (8 * exact.lambda1) * 0.9, beta)
        cfg = TwoTimescaleConfig(alpha=alpha, beta=beta, batch_size=500,
                                 iterations=100, seed=0)
        consts = self._linear_constants(linear_setup)

        def ensemble(a, b):
            return [
                run_linear_tdc(linear_setup.mdp, linear_setup.behavior,
                               linear_setup.target, linear_setup.features,
                               TwoTimescaleConfig(alpha=a, beta=b, batch_size=500,
                                                  iterations=100, seed=s),
                               exact=exact)
                for s in range(20)
            ]

        good = ensemble(alpha, beta)
        x = np.mean([t.tracking_err_sq for t in good], axis=0)
        noise_cal = 8.0 * x[-20:].mean() * (exact.lambda2 * beta / 8.0)
        rep_good = tracking_recursion_check(good, consts, "linear",
                                            linear_setup.mixing, cfg,
                                            noise_term=noise_cal, capped=True)
        bad_cfg = TwoTimescaleConfig(alpha=alpha * 10, beta=max(beta, alpha * 10),
                                     batch_size=500, iterations=100, seed=0)
        bad = ensemble(bad_cfg.alpha, bad_cfg.beta)
        rep_bad = tracking_recursion_check(bad, consts, "linear",
                                           linear_setup.mixing, bad_cfg,
                                           noise_term=noise_cal, capped=True)
        assert rep_good.satisfied_fraction >= 0.9
        assert not rep_bad.stepsize_compliant
        assert rep_bad.satisfied_fraction <= rep_good.satisfied_fraction - 0.2

    def test_unknown_kind_rejected(self, linear_setup):
        with pytest.raises(ValidationError):
            tracking_recursion_check([], {}, "bogus", linear_setup.mixing,
                                     TwoTimescaleConfig(0.1, 0.2, 1, 1))


class TestComplexitySweep:
    def test_linear_slope_and_monotonicity(self, linear_setup):
        runner = LinearSweepRunner(linear_setup.mdp, linear_setup.behavior,
                                   linear_setup.target, linear_setup.features,
                                   mixing=linear_setup.mixing)
        result = complexity_sweep(runner, [1e-1, 3e-2, 1e-2, 3e-3], seeds=range(5))
        assert result.complete
        assert 0.8 <= result.fit.slope <= 1.4
        # smaller accuracy targets never cost fewer samples
        assert all(result.tm[i] <= result.tm[i + 1] for i in range(len(result.tm) - 1))

    def test_narrow_grid_rejected(self, linear_setup):
        runner = LinearSweepRunner(linear_setup.mdp, linear_setup.behavior,
                                   linear_setup.target, linear_setup.features,
                                   mixing=linear_setup.mixing)
        with pytest.raises(ValidationError):
            complexity_sweep(runner, [1e-1, 5e-2], seeds=range(2))

    def test_unreachable_target_flagged(self, linear_setup):
        runner = LinearSweepRunner(linear_setup.mdp, linear_setup.behavior,
                                   linear_setup.target, linear_setup.features,
                                   mixing=linear_setup.mixing,
                                   window_coeff=0.02)  # far too few iterations
        result = complexity_sweep(runner, [1e-1, 1e-3], seeds=range(2))
        assert not all(result.achieved)


class TestRateFitValidation:
    def test_r_squared_range_enforced(self):
        with pytest.raises(ValidationError):
            RateFit(slope=1.0, intercept=0.0, r_squared=1.5)

    def test_loglog_fit_recovers_power_law(self):
        x = np.array([1.0, 2.0, 4.0, 8.0])
        fit = _loglog_fit(x, 3.0 * x**-1.0)
        assert fit.slope == pytest.approx(-1.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0)
