"""Nonlinear TDC: model regularity, exact oracles, the gradient identity
(the decisive finite-difference check), sampled updates, runs, constants."""

import numpy as np
import pytest

from conftest import stationary_triples
from ttsa.config import TwoTimescaleConfig
from ttsa.errors import ResourceCapError
from ttsa.linear_tdc import build_linear_exact, mspbe, tdc_gradient, w_of_theta
from ttsa.linear_tdc import LinearFeatureMap
from ttsa.mdp import MdpModel, MixingEstimate, make_garnet, uniform_policy
from ttsa.nonlinear_tdc import (
    SmoothnessLedger,
    build_nonlinear_exact,
    compute_Cf,
    compute_Cg,
    compute_D1,
    compute_Lw,
    estimate_model_constants,
    h_term,
    ledger_from_report,
    make_linear_model,
    make_model_from_spec,
    make_tanh_linear_model,
    nonlinear_J,
    nonlinear_grad,
    nonlinear_tdc_step,
    run_nonlinear_tdc,
    theorem2_bound,
    theorem2_config,
    w_of_theta_nl,
)
from ttsa.rng import make_rng


def _random_models(nl_setup, count=3):
    """Fresh tanh-linear models on the shared MDP with varied shapes."""
    out = []
    for k in range(count):
        model = make_model_from_spec(
            {"kind": "tanh-linear", "d": 3 + k % 2, "c": 0.15 + 0.1 * k,
             "kappa_lin": 1.0, "base_seed": 20 + k},
            nl_setup.mdp, nl_setup.policy,
        )
        out.append((model, build_nonlinear_exact(nl_setup.mdp, nl_setup.policy, model)))
    return out


class TestModelRegularity:
    def test_gradient_matches_value_fd(self, nl_setup):
        model, states = nl_setup.model, np.arange(nl_setup.mdp.n_states)
        rng = make_rng(2)
        h = 1e-6
        for _ in range(5):
            theta = rng.standard_normal(model.d)
            fd = np.stack(
                [(model.value(states, theta + h * e) - model.value(states, theta - h * e)) / (2 * h)
                 for e in np.eye(model.d)], axis=1)
            phi = model.grad(states, theta)
            assert np.abs(fd - phi).max() <= 1e-6 * max(np.abs(phi).max(), 1e-9)

    def test_hessian_matches_gradient_fd(self, nl_setup):
        model, states = nl_setup.model, np.arange(nl_setup.mdp.n_states)
        rng = make_rng(3)
        h = 1e-5
        theta = rng.standard_normal(model.d)
        fd = np.stack(
            [(model.grad(states, theta + h * e) - model.grad(states, theta - h * e)) / (2 * h)
             for e in np.eye(model.d)], axis=2)
        H = model.hess(states, theta)
        assert np.abs(fd - H).max() <= 1e-5 * max(np.abs(H).max(), 1e-9)

    def test_declared_bounds_hold_on_probes(self, nl_setup):
        assert nl_setup.report.ok, nl_setup.report.violations

    def test_gram_floor(self, nl_setup):
        rng = make_rng(4)
        for _ in range(5):
            theta = rng.standard_normal(nl_setup.model.d)
            gram = nl_setup.exact.gram(theta)
            assert np.linalg.eigvalsh(gram)[0] >= nl_setup.model.lambda_v - 1e-10

    def test_hess_vec_fast_path(self, nl_setup):
        model, states = nl_setup.model, np.arange(nl_setup.mdp.n_states)
        rng = make_rng(5)
        theta, u = rng.standard_normal(model.d), rng.standard_normal(model.d)
        assert np.allclose(model.hess(states, theta) @ u,
                           model.hessian_times(states, theta, u), atol=1e-12)


class TestTrackerFixedPoint:
    def test_degenerate_zero(self, nl_setup):
        mdp = nl_setup.mdp
        zero = MdpModel.from_tensors(mdp.transition, np.zeros_like(mdp.reward), mdp.gamma)
        model = make_model_from_spec({"kind": "linear", "d": 4, "base_seed": 1}, zero, nl_setup.policy)
        exact = build_nonlinear_exact(zero, nl_setup.policy, model)
        assert np.abs(w_of_theta_nl(exact, np.zeros(4))).max() <= 1e-14

    def test_residual_and_radius(self, nl_setup):
        rng = make_rng(6)
        for _ in range(5):
            theta = rng.standard_normal(nl_setup.model.d)
            w = w_of_theta_nl(nl_setup.exact, theta)
            resid = nl_setup.exact.gram(theta) @ w - nl_setup.exact.drift(theta)
            assert np.abs(resid).max() <= 1e-10
            assert np.linalg.norm(w) <= nl_setup.exact.R_w

    def test_linear_model_reduces_to_linear_module(self, nl_setup):
        model = make_model_from_spec({"kind": "linear", "d": 4, "base_seed": 1},
                                     nl_setup.mdp, nl_setup.policy)
        exact_nl = build_nonlinear_exact(nl_setup.mdp, nl_setup.policy, model)
        feats = LinearFeatureMap(model.grad(np.arange(nl_setup.mdp.n_states), np.zeros(4)))
        exact_lin = build_linear_exact(nl_setup.mdp, nl_setup.policy, nl_setup.policy, feats)
        rng = make_rng(7)
        for _ in range(5):
            theta = rng.standard_normal(4)
            assert np.abs(w_of_theta_nl(exact_nl, theta) - w_of_theta(exact_lin, theta)).max() <= 1e-10


class TestCurvatureTerm:
    def test_zero_tracker(self, nl_setup):
        theta = make_rng(8).standard_normal(nl_setup.model.d)
        assert np.abs(h_term(nl_setup.exact, theta, np.zeros(nl_setup.model.d))).max() == 0.0

    def test_linear_model_vanishes(self, nl_setup):
        model = make_model_from_spec({"kind": "linear", "d": 4, "base_seed": 1},
                                     nl_setup.mdp, nl_setup.policy)
        exact = build_nonlinear_exact(nl_setup.mdp, nl_setup.policy, model)
        rng = make_rng(9)
        assert np.abs(h_term(exact, rng.standard_normal(4), rng.standard_normal(4))).max() == 0.0

    def test_monte_carlo_agreement(self, nl_setup):
        """Population h against 1e6 stationary samples of the per-sample form."""
        exact, model = nl_setup.exact, nl_setup.model
        rng = make_rng(10)
        theta, u = rng.standard_normal(model.d) * 0.5, rng.standard_normal(model.d) * 0.5
        n = 10**6
        s, a, s2 = stationary_triples(nl_setup.mdp, nl_setup.policy, exact.mu, n, seed=55)
        v = model.value(np.arange(nl_setup.mdp.n_states), theta)
        delta = nl_setup.mdp.reward[s, a, s2] + nl_setup.mdp.gamma * v[s2] - v[s]
        resid = delta - model.grad(s, theta) @ u
        hv = model.hessian_times(s, theta, u)
        samples = hv * resid[:, None]
        se = samples.std(axis=0, ddof=1) / np.sqrt(n)
        population = h_term(exact, theta, u)
        assert np.all(np.abs(samples.mean(axis=0) - population) <= 3.0 * se + 1e-12)


class TestObjective:
    def test_zero_at_representable_value(self, nl_setup):
        """A tabular-capable linear model whose parameters hit V exactly."""
        from ttsa.mdp import value_function_exact

        n = nl_setup.mdp.n_states
        scale = 0.9
        model = make_linear_model(scale * np.eye(n), lambda_v=1e-3, theta_radius=100.0)
        exact = build_nonlinear_exact(nl_setup.mdp, nl_setup.policy, model)
        v = value_function_exact(nl_setup.mdp, nl_setup.policy)
        assert nonlinear_J(exact, v / scale) <= 1e-18

    def test_matches_linear_mspbe(self, nl_setup):
        model = make_model_from_spec({"kind": "linear", "d": 4, "base_seed": 1},
                                     nl_setup.mdp, nl_setup.policy)
        exact_nl = build_nonlinear_exact(nl_setup.mdp, nl_setup.policy, model)
        feats = LinearFeatureMap(model.grad(np.arange(nl_setup.mdp.n_states), np.zeros(4)))
        exact_lin = build_linear_exact(nl_setup.mdp, nl_setup.policy, nl_setup.policy, feats)
        rng = make_rng(11)
        for _ in range(5):
            theta = rng.standard_normal(4)
            assert nonlinear_J(exact_nl, theta) == pytest.approx(
                mspbe(exact_lin, theta), abs=1e-10)

    def test_matches_explicit_projection(self, nl_setup):
        """J against the tangent-space projection computed in |S| space."""
        exact, model = nl_setup.exact, nl_setup.model
        states = np.arange(nl_setup.mdp.n_states)
        rng = make_rng(12)
        D = np.diag(exact.mu)
        for _ in range(5):
            theta = rng.standard_normal(model.d) * 0.7
            phi = model.grad(states, theta)
            proj = phi @ np.linalg.solve(phi.T @ D @ phi, phi.T @ D)
            bellman_resid = exact.mean_td(theta)  # E[T v - v | s]
            projected = proj @ bellman_resid
            direct = float(projected @ D @ projected)
            J = nonlinear_J(exact, theta)
            assert J >= 0.0
            assert J == pytest.approx(direct, abs=1e-10)


class TestGradientIdentity:
    def test_matches_finite_differences(self, nl_setup):
        """The decisive check: the correction-term identity against central
        differences of J, on 3 random models x 20 points."""
        h = 1e-5
        rng = make_rng(13)
        for model, exact in _random_models(nl_setup):
            d = model.d
            for _ in range(20):
                theta = rng.standard_normal(d) * 0.8
                fd = np.empty(d)
                for i in range(d):
                    e = np.zeros(d)
                    e[i] = h
                    fd[i] = (nonlinear_J(exact, theta + e) - nonlinear_J(exact, theta - e)) / (2 * h)
                grad = nonlinear_grad(exact, theta)
                assert np.linalg.norm(fd - grad) <= 1e-5 * max(np.linalg.norm(grad), 1e-8)

    def test_symmetric_instance_critical_point(self):
        """Mirror construction: opposite features on two uniformly coupled
        states make J even in theta, so the origin is a critical point
        while J stays nonconstant around it."""
        P = np.zeros((2, 1, 2))
        P[:, 0, :] = 0.5
        mdp = MdpModel.from_tensors(P, np.zeros_like(P), gamma=0.5)
        pol = uniform_policy(mdp)
        psi = np.array([[0.9], [-0.9]])
        model = make_tanh_linear_model(psi, c=0.3, kappa_lin=1.0, lambda_psi=0.81)
        exact = build_nonlinear_exact(mdp, pol, model)
        assert np.abs(nonlinear_grad(exact, np.zeros(1))).max() <= 1e-12
        assert nonlinear_J(exact, np.array([0.5])) > 1e-4
        assert nonlinear_J(exact, np.array([0.5])) == pytest.approx(
            nonlinear_J(exact, np.array([-0.5])), rel=1e-12)

    def test_linear_model_gradient_reduces(self, nl_setup):
        model = make_model_from_spec({"kind": "linear", "d": 4, "base_seed": 1},
                                     nl_setup.mdp, nl_setup.policy)
        exact_nl = build_nonlinear_exact(nl_setup.mdp, nl_setup.policy, model)
        feats = LinearFeatureMap(model.grad(np.arange(nl_setup.mdp.n_states), np.zeros(4)))
        exact_lin = build_linear_exact(nl_setup.mdp, nl_setup.policy, nl_setup.policy, feats)
        rng = make_rng(14)
        for _ in range(5):
            theta = rng.standard_normal(4)
            assert np.abs(nonlinear_grad(exact_nl, theta) - tdc_gradient(exact_lin, theta)).max() <= 1e-10


class TestStep:
    def test_zero_stepsizes_identity(self, nl_setup):
        from ttsa.mdp import sample_trajectory

        stream = sample_trajectory(nl_setup.mdp, nl_setup.policy, seed=0, length=8)
        theta = np.array([0.2, -0.4, 0.1, 0.3])
        w = np.array([0.05, 0.1, -0.1, 0.2])
        t2, w2 = nonlinear_tdc_step(theta, w, stream.next_batch(8), 0.0, 0.0,
                                    nl_setup.mdp.gamma, nl_setup.model)
        assert np.array_equal(t2, theta) and np.array_equal(w2, w)

    def test_hand_computed_single_sample(self):
        """d = 2 tanh-linear model, M = 1, both lines by scalar arithmetic."""
        psi = np.array([[0.6, 0.3], [0.2, 0.7]])
        c, klin, gamma = 0.4, 1.0, 0.8
        model = make_tanh_linear_model(psi, c=c, kappa_lin=klin, lambda_psi=0.1)
        theta = np.array([0.5, -0.2])
        w = np.array([0.3, 0.1])
        alpha, beta = 0.6, 0.9
        s, a, r, s2, a2 = (np.array([0]), np.array([0]), np.array([0.7]),
                           np.array([1]), np.array([0]))

        def v(row, th):
            u = row @ th
            return c * np.tanh(u) + klin * u

        def phi(row, th):
            u = row @ th
            return (c * (1 - np.tanh(u) ** 2) + klin) * row

        def hess(row, th):
            u = row @ th
            t = np.tanh(u)
            return -2 * c * t * (1 - t * t) * np.outer(row, row)

        r0, r1 = psi[0], psi[1]
        delta = 0.7 + gamma * v(r1, theta) - v(r0, theta)
        phi_s, phi_s2 = phi(r0, theta), phi(r1, theta)
        h_j = (delta - phi_s @ w) * (hess(r0, theta) @ w)
        w_expect = w + beta * (-(phi_s @ w) * phi_s + delta * phi_s)
        t_expect = theta + alpha * (delta * phi_s - gamma * (phi_s @ w) * phi_s2 - h_j)
        t2, w2 = nonlinear_tdc_step(theta, w, (s, a, r, s2, a2), alpha, beta, gamma, model)
        assert np.abs(t2 - t_expect).max() <= 1e-15
        assert np.abs(w2 - w_expect).max() <= 1e-15

    def test_expected_update_direction(self, nl_setup):
        exact, model = nl_setup.exact, nl_setup.model
        rng = make_rng(15)
        theta = rng.standard_normal(model.d) * 0.5
        w = rng.standard_normal(model.d) * 0.3
        n = 10**6
        s, a, s2 = stationary_triples(nl_setup.mdp, nl_setup.policy, exact.mu, n, seed=66)
        v = model.value(np.arange(nl_setup.mdp.n_states), theta)
        delta = nl_setup.mdp.reward[s, a, s2] + nl_setup.mdp.gamma * v[s2] - v[s]
        phi_s = model.grad(s, theta)
        phi_s2 = model.grad(s2, theta)
        proj = phi_s @ w
        hv = model.hessian_times(s, theta, w)
        dirs = delta[:, None] * phi_s - nl_setup.mdp.gamma * proj[:, None] * phi_s2 - (
            hv * (delta - proj)[:, None]
        )
        se = dirs.std(axis=0, ddof=1) / np.sqrt(n)
        population = exact.drift(theta) - nl_setup.mdp.gamma * exact.cross(theta) @ w - h_term(
            exact, theta, w)
        assert np.all(np.abs(dirs.mean(axis=0) - population) <= 3.0 * se)


class TestRun:
    def test_single_iteration_output_index(self, nl_setup):
        cfg = TwoTimescaleConfig(alpha=0.1, beta=0.2, batch_size=5, iterations=1, seed=0)
        trace = run_nonlinear_tdc(nl_setup.mdp, nl_setup.policy, nl_setup.model, cfg,
                                  exact=nl_setup.exact)
        assert trace.output_index == 1

    def test_zero_rewards_zero_init_stays(self, nl_setup):
        mdp = nl_setup.mdp
        zero = MdpModel.from_tensors(mdp.transition, np.zeros_like(mdp.reward), mdp.gamma)
        model = make_model_from_spec({"kind": "tanh-linear", "d": 4, "c": 0.25,
                                      "kappa_lin": 1.0, "base_seed": 1}, zero, nl_setup.policy)
        exact = build_nonlinear_exact(zero, nl_setup.policy, model)
        cfg = TwoTimescaleConfig(alpha=0.3, beta=0.5, batch_size=10, iterations=20, seed=2)
        trace = run_nonlinear_tdc(zero, nl_setup.policy, model, cfg, exact=exact)
        assert np.abs(trace.theta_final).max() == 0.0
        assert np.abs(trace.objective).max() == 0.0

    def test_output_index_uniformity(self, nl_setup):
        """Frequency of each index over 1e4 cheap runs with T = 4."""
        mdp = nl_setup.mdp
        model = make_model_from_spec({"kind": "linear", "d": 2, "base_seed": 9},
                                     mdp, nl_setup.policy)
        exact = build_nonlinear_exact(mdp, nl_setup.policy, model)
        counts = np.zeros(5)
        for seed in range(10**4):
            cfg = TwoTimescaleConfig(alpha=0.1, beta=0.2, batch_size=1, iterations=4, seed=seed)
            trace = run_nonlinear_tdc(mdp, nl_setup.policy, model, cfg, exact=exact)
            counts[trace.output_index] += 1
        freqs = counts[1:] / 10**4
        assert counts[0] == 0
        assert np.all(np.abs(freqs - 0.25) <= 0.02)

    def test_bound_not_violated(self, nl_setup):
        exact, model, ledger = nl_setup.exact, nl_setup.model, nl_setup.ledger
        beta = 0.8 / model.C_phi**2
        cfg = TwoTimescaleConfig(alpha=beta, beta=beta, batch_size=250, iterations=150, seed=0)
        uniform_means, finals = [], []
        for seed in range(20):
            trace = run_nonlinear_tdc(nl_setup.mdp, nl_setup.policy, model,
                                      cfg.replace(seed=seed), exact=exact)
            uniform_means.append(trace.grad_norm_sq[1:].mean())
            finals.append(trace.objective[-1])
        j0 = nonlinear_J(exact, np.zeros(model.d))
        w_gap0 = float(np.sum(w_of_theta_nl(exact, np.zeros(model.d)) ** 2))
        rhs = theorem2_bound(ledger, model.lambda_v, nl_setup.mixing, cfg,
                             J0=j0, JT=float(np.mean(finals)), w_gap0_sq=w_gap0)
        assert np.mean(uniform_means) <= rhs


class TestConstants:
    def test_Lw_degenerate(self):
        assert compute_Lw(C_phi=1.0, C_v=1.0, L_v=0.0, L_phi=0.0, lambda_v=1.0,
                          r_max=1.0, gamma=0.9) == 0.0

    def test_Lw_hand_evaluation(self):
        # all constants 1, gamma = 0.9:
        # (2*1*1/1)[1 + 1.9*1] + (1/1)[1*1*1.9 + 1*(1 + 1.9*1)]
        expect = 2.0 * 2.9 + (1.9 + 2.9)
        assert compute_Lw(1, 1, 1, 1, 1, 1, 0.9) == pytest.approx(expect, rel=1e-12)

    def test_Lw_dominates_empirical_quotients(self, nl_setup):
        model, exact = nl_setup.model, nl_setup.exact
        lw = compute_Lw(model.C_phi, model.C_v, model.L_v, model.L_phi,
                        model.lambda_v, nl_setup.mdp.r_max, nl_setup.mdp.gamma)
        rng = make_rng(16)
        worst = 0.0
        for _ in range(100):
            t1 = rng.standard_normal(model.d)
            t2 = rng.standard_normal(model.d)
            gap = np.linalg.norm(t1 - t2)
            if gap < 1e-9:
                continue
            q = np.linalg.norm(w_of_theta_nl(exact, t1) - w_of_theta_nl(exact, t2)) / gap
            worst = max(worst, q)
        assert worst <= lw

    def test_Cg_degenerate(self):
        assert compute_Cg(C_phi=1.0, C_v=1.0, D_v=0.0, R_w=0.0, r_max=1.0, gamma=0.5) == pytest.approx(
            (1.0 + 1.5 * 1.0) * 1.0)

    def test_Cg_hand_evaluation(self):
        # all constants 1, gamma = 0.5: [1 + 1.5] + 0.5 + [1 + 1.5 + 1] * 1
        expect = 2.5 + 0.5 + 3.5
        assert compute_Cg(1, 1, 1, 1, 1, 0.5) == pytest.approx(expect, rel=1e-12)

    def test_Cg_dominates_samples(self, nl_setup):
        """Sampled update directions at w(theta) stay under C_g."""
        model, exact = nl_setup.model, nl_setup.exact
        r_w = exact.R_w
        cg = compute_Cg(model.C_phi, model.C_v, model.D_v, r_w,
                        nl_setup.mdp.r_max, nl_setup.mdp.gamma)
        rng = make_rng(17)
        n = 10**5
        worst = 0.0
        for k in range(10):
            theta = rng.standard_normal(model.d)
            theta *= min(1.0, model.theta_radius / np.linalg.norm(theta))
            w = w_of_theta_nl(exact, theta)
            s, a, s2 = stationary_triples(nl_setup.mdp, nl_setup.policy, exact.mu,
                                          n // 10, seed=200 + k)
            v = model.value(np.arange(nl_setup.mdp.n_states), theta)
            delta = nl_setup.mdp.reward[s, a, s2] + nl_setup.mdp.gamma * v[s2] - v[s]
            phi_s = model.grad(s, theta)
            proj = phi_s @ w
            hv = model.hessian_times(s, theta, w)
            dirs = delta[:, None] * phi_s - nl_setup.mdp.gamma * proj[:, None] * model.grad(s2, theta) - (
                hv * (delta - proj)[:, None])
            worst = max(worst, float(np.linalg.norm(dirs, axis=1).max()))
        assert worst <= cg


class TestScheduleCalculator:
    def _ones_ledger(self):
        return SmoothnessLedger(L_J=1.0, L_e=1.0, L_w=1.0, C_g=1.0, C_f=1.0, R_w=1.0)

    def _ones_model(self):
        return make_linear_model(np.eye(2), lambda_v=1.0, theta_radius=1.0)

    def test_all_ones_hand_evaluation(self):
        ledger = self._ones_ledger()
        model = self._ones_model()
        mixing = MixingEstimate(kappa=1.0, rho=0.5, max_residual=0.0)
        report = theorem2_config(ledger, model, mixing, target_eps=1e-2,
                                 J0=1.0, w_gap0_sq=0.0, max_batch=10**30)
        beta = min(1.0 / 8.0, 8.0)
        assert report.config.beta == pytest.approx(beta)
        alpha = min(0.5, beta / (8 * np.sqrt(2)), beta**2 / 384.0)
        assert report.details["alpha_unclamped"] == pytest.approx(alpha)
        d1 = 128.0 * alpha**2 / beta + 4.0 * (beta + 2 * beta**2)
        assert report.details["D1"] == pytest.approx(d1, rel=1e-12)
        b2 = 64.0 * (1 + alpha) * (1.0 + 2.0 * d1 / beta) * mixing.factor
        assert report.details["B2"] == pytest.approx(b2, rel=1e-12)

    def test_two_timescale_ordering(self, nl_setup):
        report = theorem2_config(nl_setup.ledger, nl_setup.model, nl_setup.mixing,
                                 target_eps=1e-2, J0=1.0, max_batch=10**30)
        assert report.config.alpha <= report.config.beta

    def test_cost_scales_inverse_square(self):
        ledger = self._ones_ledger()
        model = self._ones_model()
        mixing = MixingEstimate(kappa=1.2, rho=0.5, max_residual=0.0)
        eps = np.array([1e-1, 3e-2, 1e-2, 3e-3])
        tm = np.array([
            theorem2_config(ledger, model, mixing, e, J0=1.0, w_gap0_sq=0.5,
                            max_batch=10**30).total_samples
            for e in eps
        ], dtype=float)
        slope = np.polyfit(np.log(1 / eps), np.log(tm), 1)[0]
        assert 1.9 <= slope <= 2.1

    def test_resource_cap(self, nl_setup):
        with pytest.raises(ResourceCapError):
            theorem2_config(nl_setup.ledger, nl_setup.model, nl_setup.mixing,
                            target_eps=1e-9, max_batch=10**4)


class TestConstantEstimation:
    def test_linear_model_degenerate_estimates(self, nl_setup):
        model = make_model_from_spec({"kind": "linear", "d": 4, "base_seed": 1},
                                     nl_setup.mdp, nl_setup.policy)
        grid = make_rng(18).standard_normal((8, 4))
        report = estimate_model_constants(model, nl_setup.mdp, nl_setup.policy, grid)
        assert report.D_v == 0.0
        assert report.L_phi == 0.0

    def test_pure_tanh_value_bound(self, nl_setup):
        c = 0.6
        psi = make_rng(19).standard_normal((nl_setup.mdp.n_states, 3))
        psi /= np.maximum(np.linalg.norm(psi, axis=1, keepdims=True), 1.0)
        model = make_tanh_linear_model(psi, c=c, kappa_lin=1e-6, lambda_psi=1e-9)
        grid = make_rng(20).standard_normal((10, 3)) * 3.0
        report = estimate_model_constants(model, nl_setup.mdp, nl_setup.policy, grid)
        assert report.C_v <= c + 1e-4

    def test_gram_floor_matches_eigensolve(self, nl_setup):
        grid = make_rng(21).standard_normal((6, nl_setup.model.d)) * 0.5
        report = estimate_model_constants(nl_setup.model, nl_setup.mdp, nl_setup.policy,
                                          grid, exact=nl_setup.exact)
        direct = min(
            np.linalg.eigvalsh(nl_setup.exact.gram(t))[0] for t in grid
        )
        assert report.lambda_v == pytest.approx(direct, abs=1e-10)

    def test_violation_reported_not_raised(self, nl_setup):
        from dataclasses import replace

        bad = replace(nl_setup.model, C_phi=nl_setup.model.C_phi / 10.0)
        grid = make_rng(22).standard_normal((5, bad.d))
        report = estimate_model_constants(bad, nl_setup.mdp, nl_setup.policy, grid)
        assert not report.ok
        assert any("C_phi" in v for v in report.violations)
