"""Two-timescale Greedy-GQ: softmax-greedy policy optimization over
linear state-action features.

Exact oracles weight current pairs by the behavior stationary pair
measure and take the softmax target policy's expectation over next
state-actions, so the objective is the projected Bellman error of the
policy that is greedy (softly) with respect to the current parameters.
The reported gradient is the algorithm's stated stationarity measure
2 A_theta^T Sigma^{-1} (A_theta theta + b); terms from differentiating
the policy inside A_theta are deliberately absent, so it need not match
finite differences of the objective — the gap is exposed as a
diagnostic instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, sqrt

import numpy as np

from ttsa.config import RunTrace, TwoTimescaleConfig
from ttsa.errors import ResourceCapError, SupportError, ValidationError
from ttsa.linalg import guarded_inv, sym_eig_bounds
from ttsa.mdp import (
    MdpModel,
    MixingEstimate,
    PolicyTable,
    induced_chain,
    sample_trajectory,
    stationary_distribution,
)
from ttsa.rng import make_rng

MAX_BATCH = 10**8


@dataclass(frozen=True)
class StateActionFeatureMap:
    """Fixed features phi(s, a), stored as a (states, actions, d) table."""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 3:
            raise ValidationError("state-action features must be 3-D (S x A x d)")
        norms = np.linalg.norm(phi, axis=2)
        if norms.max(initial=0.0) > 1.0 + 1e-12:
            raise ValidationError("feature vectors must have 2-norm at most 1")
        stacked = phi.reshape(-1, phi.shape[2])
        if stacked.shape[0] < stacked.shape[1]:
            raise ValidationError("need at least d state-action pairs")
        if np.linalg.svd(stacked, compute_uv=False)[-1] <= 1e-10:
            raise ValidationError("stacked feature matrix must have full column rank")
        object.__setattr__(self, "phi", phi)

    @property
    def d(self) -> int:
        return self.phi.shape[2]

    @property
    def n_states(self) -> int:
        return self.phi.shape[0]

    @property
    def n_actions(self) -> int:
        return self.phi.shape[1]

    @staticmethod
    def random(n_states: int, n_actions: int, d: int, seed: int = 0) -> "StateActionFeatureMap":
        rng = make_rng(seed)
        phi = rng.standard_normal((n_states, n_actions, d))
        norms = np.linalg.norm(phi, axis=2, keepdims=True)
        return StateActionFeatureMap(phi / np.maximum(norms, 1.0))

    @staticmethod
    def tabular(n_states: int, n_actions: int, scale: float = 1.0) -> "StateActionFeatureMap":
        eye = scale * np.eye(n_states * n_actions)
        return StateActionFeatureMap(eye.reshape(n_states, n_actions, -1))


def softmax_policy(features: StateActionFeatureMap, theta: np.ndarray, tau: float) -> PolicyTable:
    """pi(a|s) proportional to exp(tau * phi(s,a)^T theta), max-stabilized."""
    if tau <= 0:
        raise ValidationError("softmax temperature must be positive")
    logits = tau * (features.phi @ theta)
    logits -= logits.max(axis=1, keepdims=True)
    expl = np.exp(logits)
    return PolicyTable(expl / expl.sum(axis=1, keepdims=True))


@dataclass(frozen=True)
class SoftmaxPolicy:
    """Parameterized softmax-greedy policy over state-action values."""

    features: StateActionFeatureMap
    theta: np.ndarray
    tau: float

    def __post_init__(self):
        if self.tau <= 0:
            raise ValidationError("softmax temperature must be positive")
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))

    def table(self) -> PolicyTable:
        return softmax_policy(self.features, self.theta, self.tau)

    @property
    def probs(self) -> np.ndarray:
        return _softmax_probs(self.features, self.theta, self.tau)


def _softmax_probs(features: StateActionFeatureMap, theta: np.ndarray, tau: float) -> np.ndarray:
    logits = tau * (features.phi @ theta)
    logits -= logits.max(axis=1, keepdims=True)
    expl = np.exp(logits)
    return expl / expl.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class GreedyGqExact:
    """Exact evaluators for the softmax-greedy optimization problem.

    Sigma (and C = -Sigma) are policy-independent; A_theta and the
    derived quantities rebuild the softmax policy at each theta.
    """

    mdp: MdpModel
    behavior: PolicyTable
    features: StateActionFeatureMap
    tau: float
    mu: np.ndarray  # state stationary distribution of the behavior chain
    pair_weights: np.ndarray  # mu(s) * pi_b(a|s)
    Sigma: np.ndarray
    C: np.ndarray
    Sigma_inv: np.ndarray
    b: np.ndarray
    rho_max: float
    lambda2: float
    lambda1: float  # probe estimate of the worst-case slow-timescale gap inverse
    L_J: float  # probe estimate of the stated-gradient Lipschitz modulus
    R_theta: float  # probe bound on the per-theta fixed points

    @property
    def d(self) -> int:
        return self.features.d

    def policy(self, theta: np.ndarray) -> np.ndarray:
        return _softmax_probs(self.features, theta, self.tau)

    def next_feature_mean(self, theta: np.ndarray) -> np.ndarray:
        """ebar(s,a) = E_{s'}[ E_{pi_theta}[phi(s', b)] ], shape (S, A, d)."""
        pi = self.policy(theta)
        phibar = np.einsum("sb,sbk->sk", pi, self.features.phi)  # per next state
        return np.einsum("sap,pk->sak", self.mdp.transition, phibar)

    def A_theta(self, theta: np.ndarray) -> np.ndarray:
        diff = self.mdp.gamma * self.next_feature_mean(theta) - self.features.phi
        return np.einsum("sa,sak,sal->kl", self.pair_weights, self.features.phi, diff)

    def b_theta(self, theta: np.ndarray) -> np.ndarray:
        # rewards live on (s, a, s') triples, so b carries no policy term
        return self.b

    def residual(self, theta: np.ndarray) -> np.ndarray:
        return self.A_theta(theta) @ theta + self.b


def build_greedy_gq_exact(
    mdp: MdpModel,
    behavior: PolicyTable,
    features: StateActionFeatureMap,
    tau: float,
    probe_count: int = 64,
    probe_seed: int = 0,
) -> GreedyGqExact:
    """Exact pair-measure quantities plus probe estimates of the
    theta-uniform constants (gap, Lipschitz modulus, fixed-point radius)."""
    if features.n_states != mdp.n_states or features.n_actions != mdp.n_actions:
        raise ValidationError("feature table does not match the MDP")
    if np.any(behavior.probs <= 0):
        raise SupportError("behavior policy must be non-degenerate for Greedy-GQ")
    chain = induced_chain(mdp, behavior)
    mu = stationary_distribution(chain)
    pair_w = mu[:, None] * behavior.probs
    Phi = features.phi
    Sigma = np.einsum("sa,sak,sal->kl", pair_w, Phi, Phi)
    Sigma_inv = guarded_inv(Sigma, "pair second-moment matrix")
    r_bar = mdp.expected_reward()
    b = np.einsum("sa,sa,sak->k", pair_w, r_bar, Phi)
    lambda2 = float(np.linalg.eigvalsh(Sigma)[0])
    # softmax probabilities can approach 1, so the ratio sup over theta
    # is 1 / min behavior probability
    rho_max = float((1.0 / behavior.probs).max())

    def a_theta(theta: np.ndarray) -> np.ndarray:
        pi = _softmax_probs(features, theta, tau)
        phibar = np.einsum("sb,sbk->sk", pi, Phi)
        ebar = np.einsum("sap,pk->sak", mdp.transition, phibar)
        return np.einsum("sa,sak,sal->kl", pair_w, Phi, mdp.gamma * ebar - Phi)

    rng = make_rng(probe_seed)
    d = features.d
    lam_min_worst = np.inf
    r_theta = 0.0
    l_j = 0.0
    prev = None
    for _ in range(probe_count):
        theta = rng.standard_normal(d) * (0.5 + 2.0 * rng.random())
        A = a_theta(theta)
        lam_min, _ = sym_eig_bounds(A.T @ Sigma_inv @ A)
        lam_min_worst = min(lam_min_worst, lam_min)
        try:
            fp = np.linalg.solve(A, -b)
            r_theta = max(r_theta, float(np.linalg.norm(fp)))
        except np.linalg.LinAlgError:
            pass
        grad = 2.0 * A.T @ (Sigma_inv @ (A @ theta + b))
        if prev is not None:
            gap = float(np.linalg.norm(theta - prev[0]))
            if gap > 1e-9:
                l_j = max(l_j, float(np.linalg.norm(grad - prev[1])) / gap)
        prev = (theta, grad)

    lambda1 = 1.0 / lam_min_worst if lam_min_worst > 0 else np.inf
    return GreedyGqExact(
        mdp=mdp, behavior=behavior, features=features, tau=tau,
        mu=mu, pair_weights=pair_w, Sigma=Sigma, C=-Sigma, Sigma_inv=Sigma_inv,
        b=b, rho_max=rho_max, lambda2=lambda2, lambda1=float(lambda1),
        L_J=float(2.0 * l_j),  # difference-quotient estimate, safety factor 2
        R_theta=float(r_theta),
    )


def gq_objective(exact: GreedyGqExact, theta: np.ndarray) -> float:
    """Projected Bellman error of the softmax-greedy policy at theta."""
    resid = exact.residual(theta)
    return float(resid @ exact.Sigma_inv @ resid)


def gq_w_of_theta(exact: GreedyGqExact, theta: np.ndarray) -> np.ndarray:
    return exact.Sigma_inv @ exact.residual(theta)


def gq_gradient(exact: GreedyGqExact, theta: np.ndarray) -> np.ndarray:
    """Stated stationarity measure 2 A_theta^T Sigma^{-1} residual(theta)."""
    return 2.0 * exact.A_theta(theta).T @ (exact.Sigma_inv @ exact.residual(theta))


def gq_gradient_gap(exact: GreedyGqExact, theta: np.ndarray, step: float = 1e-6) -> float:
    """Diagnostic: norm gap between the stated measure and central finite
    differences of the objective (nonzero in general, since the stated
    measure drops the policy-differentiation terms)."""
    d = exact.d
    fd = np.empty(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = step
        fd[i] = (gq_objective(exact, theta + e) - gq_objective(exact, theta - e)) / (2 * step)
    return float(np.linalg.norm(fd - gq_gradient(exact, theta)))


def update_noise_second_moment(
    exact: GreedyGqExact, theta: np.ndarray | None = None, w: np.ndarray | None = None
) -> float:
    """Exact E||g_j(theta, w)||^2 of the expected-next slow update."""
    if theta is None:
        theta = np.zeros(exact.d)
    if w is None:
        w = gq_w_of_theta(exact, theta)
    mdp = exact.mdp
    Phi = exact.features.phi
    pi = exact.policy(theta)
    q = Phi @ theta
    qbar = (pi * q).sum(axis=1)
    phibar = np.einsum("sb,sbk->sk", pi, Phi)
    total = 0.0
    for s in range(mdp.n_states):
        for a in range(mdp.n_actions):
            wsa = exact.pair_weights[s, a]
            if wsa == 0:
                continue
            phi_sa = Phi[s, a]
            proj = float(phi_sa @ w)
            for s2 in np.nonzero(mdp.transition[s, a])[0]:
                p = mdp.transition[s, a, s2]
                delta = mdp.reward[s, a, s2] + mdp.gamma * qbar[s2] - q[s, a]
                g = delta * phi_sa - mdp.gamma * proj * phibar[s2]
                total += wsa * p * float(g @ g)
    return total


def greedy_gq_step(
    theta: np.ndarray,
    w: np.ndarray,
    batch,
    alpha: float,
    beta: float,
    gamma: float,
    features: StateActionFeatureMap,
    behavior: PolicyTable,
    tau: float,
    sampled_next: bool = False,
):
    """One mini-batch update.

    The tracker update follows the listing: ratio rho_theta(s_j, a_j) on
    the TD term.  The main update defaults to the expected-next form
    (exact inner expectation over the next action, no next-pair ratio),
    which finite action sets make exact and strictly lower-variance;
    ``sampled_next`` switches to the literal sampled next-action form.
    """
    s, a, r, s2, a2 = batch
    m = len(s)
    Phi = features.phi
    pi = _softmax_probs(features, theta, tau)
    pb = behavior.probs[s, a]
    if np.any(pb <= 0):
        raise SupportError("behavior policy has no mass on a visited pair")
    rho = pi[s, a] / pb

    phi_sa = Phi[s, a]
    q_table = Phi @ theta  # (S, A)
    qbar = (pi * q_table).sum(axis=1)  # E_{pi_theta}[Q(s, .)]
    delta = r + gamma * qbar[s2] - phi_sa @ theta
    phi_w = phi_sa @ w

    w_dir = (-(phi_sa.T @ phi_w) + phi_sa.T @ (rho * delta)) / m

    if sampled_next:
        rho2 = pi[s2, a2] / behavior.probs[s2, a2]
        corr = Phi[s2, a2]
        theta_dir = (
            phi_sa.T @ (rho2 * delta) - gamma * corr.T @ (rho2 * phi_w)
        ) / m
    else:
        phibar = np.einsum("sb,sbk->sk", pi, Phi)  # expected next feature per state
        theta_dir = (phi_sa.T @ delta - gamma * phibar[s2].T @ phi_w) / m
    return theta + alpha * theta_dir, w + beta * w_dir


def run_greedy_gq(
    mdp: MdpModel,
    behavior: PolicyTable,
    features: StateActionFeatureMap,
    tau: float,
    config: TwoTimescaleConfig,
    exact: GreedyGqExact | None = None,
    theta0: np.ndarray | None = None,
    w0: np.ndarray | None = None,
    sampled_next: bool = False,
    project_on_violation: bool = True,
) -> RunTrace:
    """Run with per-iteration exact scoring and a uniform output index.

    Importance ratios are guarded against the declared rho_max; a trip
    is recorded as an assumption violation and (by default) enables
    projection of theta onto the ball of radius 10 R_theta so later
    ratios stay certifiable.
    """
    if exact is None:
        exact = build_greedy_gq_exact(mdp, behavior, features, tau)
    d = features.d
    theta = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    w = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float).copy()
    T, M = config.iterations, config.batch_size
    stream = sample_trajectory(mdp, behavior, config.seed, max(T * M, 1))

    track_err = np.empty(T + 1)
    objective = np.empty(T + 1)
    grad_sq = np.empty(T + 1)
    thetas = np.empty((T + 1, d))
    violations: list[str] = []
    projecting = False

    def record(i, th, ww):
        thetas[i] = th
        track_err[i] = np.sum((ww - gq_w_of_theta(exact, th)) ** 2)
        objective[i] = gq_objective(exact, th)
        grad_sq[i] = np.sum(gq_gradient(exact, th) ** 2)

    record(0, theta, w)
    cap = 10.0 * exact.R_theta if np.isfinite(exact.R_theta) else np.inf
    for t in range(T):
        batch = stream.next_batch(M)
        s, a = batch[0], batch[1]
        pi = _softmax_probs(features, theta, tau)
        worst = float((pi[s, a] / behavior.probs[s, a]).max())
        if worst > exact.rho_max * (1.0 + 1e-9):
            violations.append(
                f"t={t}: importance ratio {worst:.4g} exceeds rho_max {exact.rho_max:.4g}"
            )
            if project_on_violation:
                projecting = True
        theta, w = greedy_gq_step(
            theta, w, batch, config.alpha, config.beta, mdp.gamma,
            features, behavior, tau, sampled_next=sampled_next,
        )
        if projecting and np.linalg.norm(theta) > cap:
            theta *= cap / np.linalg.norm(theta)
            violations.append(f"t={t}: theta projected to radius {cap:.4g}")
        record(t + 1, theta, w)

    output_index = stream.draw_index(1, T + 1) if T >= 1 else 0
    ts = np.arange(T + 1)
    return RunTrace(
        algo="greedy-gq",
        seed=config.seed,
        batch_size=M,
        t=ts,
        samples=ts * M,
        tracking_err_sq=track_err,
        objective=objective,
        grad_norm_sq=grad_sq,
        theta_final=theta,
        w_final=w,
        thetas=thetas,
        output_index=output_index,
        assumption_violations=violations,
    )


# --- schedule calculator ------------------------------------------------------


def compute_C2(exact: GreedyGqExact) -> float:
    return 32.0 * (
        2.0 * (exact.rho_max + 1.0) ** 4 * exact.R_theta**2
        + (exact.mdp.r_max**2 + 1.0) * exact.rho_max**2
    )


def compute_C1(
    exact: GreedyGqExact, mixing: MixingEstimate, alpha: float, beta: float
) -> float:
    """Variance constant of the stationarity bound's 1/M floor."""
    l2, rho = exact.lambda2, exact.rho_max
    c2 = compute_C2(exact)
    return c2 + (192.0 * rho**2 / (l2 * beta)) * (
        4.0 * exact.R_theta**2 * rho**2 + exact.mdp.r_max**2
    ) * (32.0 * alpha**2 / (l2**2 * beta) + 2.0 * beta / l2 + 2.0 * beta**2)


def theorem3_bound(
    exact: GreedyGqExact,
    mixing: MixingEstimate,
    config: TwoTimescaleConfig,
    J0: float,
    JT: float,
    w_gap0_sq: float,
) -> float:
    """Right-hand side of the stationarity bound for a finished run."""
    c1 = compute_C1(exact, mixing, config.alpha, config.beta)
    return (
        8.0 * (J0 - JT) / (config.alpha * config.iterations)
        + (192.0 * exact.rho_max**2 / (exact.lambda2 * config.beta))
        * w_gap0_sq
        / config.iterations
        + 32.0 * c1 * mixing.factor / config.batch_size
    )


def theorem3_config(
    exact: GreedyGqExact,
    mixing: MixingEstimate,
    target_eps: float,
    J0: float = 1.0,
    w_gap0_sq: float = 0.0,
    seed: int = 0,
    max_batch: int = MAX_BATCH,
):
    """Literal worst-case schedule for an eps-accurate stationary point."""
    from ttsa.linear_tdc import ScheduleReport

    if target_eps <= 0:
        raise ValidationError("target accuracy must be positive")
    l1, l2, rho = exact.lambda1, exact.lambda2, exact.rho_max
    beta = min(l2 / 4.0, 8.0 / l2)
    alpha_terms = {
        "inv_8LJ": 1.0 / (8.0 * exact.L_J),
        "tracking": l2 * sqrt(l2) * beta / (8.0 * sqrt(2.0) * rho),
        "cubic": exact.L_J * l2**3 * beta**2 / (5312.0 * rho**2 * l1**2),
    }
    alpha = min(alpha_terms.values())
    c1 = compute_C1(exact, mixing, alpha, beta)
    c2 = compute_C2(exact)
    m_floor = mixing.factor * max(
        128.0
        * (rho**2 + 1.0 / l2**2)
        * (1.0 + (l2**2 * beta / (4.0 * alpha**2)) * (2.0 * beta / l2 + 2.0 * beta**2)),
        beta**2 * l2**3 * (rho + 1.0) ** 4 / (rho**2 * alpha**2),
    )
    M = int(ceil(max(m_floor, 64.0 * c2 * mixing.factor / target_eps)))
    if M > max_batch:
        raise ResourceCapError(
            f"required batch size {M} exceeds the configured cap {max_batch}"
        )
    T = int(
        ceil(
            (2.0 / target_eps)
            * (8.0 * J0 / alpha + 192.0 * rho**2 * w_gap0_sq / (l2 * beta))
        )
    )
    config = TwoTimescaleConfig(
        alpha=min(alpha, beta), beta=beta, batch_size=M, iterations=max(T, 1), seed=seed
    )
    return ScheduleReport(
        config=config,
        target_eps=target_eps,
        rate=l2 * beta / 8.0,
        variance_constant=c1,
        delta0=J0,
        total_samples=config.iterations * M,
        details={"alpha_terms": alpha_terms, "C1": c1, "C2": c2,
                 "alpha_unclamped": alpha, "m_floor": m_floor},
    )
