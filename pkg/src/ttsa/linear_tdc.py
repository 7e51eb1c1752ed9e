"""Mini-batch two-timescale linear TDC with exact off-policy oracles.

The exact object carries every population quantity of the evaluation
problem (A, B, C, Sigma, b, the fixed point, eigen-gaps, importance
bounds), computed by finite sums over the MDP, so iterates can be scored
against closed forms at every step.

Orientation convention: A = E_mu[phi(s) (gamma*phibar(s) - phi(s))^T],
the unique orientation making E[delta(theta) phi] = A theta + b,
theta* = -A^{-1} b the TD fixed point, J the projected Bellman error,
and the sampled updates unbiased, all simultaneously.  Under it
A^T Sigma^{-1} A is symmetric, so the literal spectral reading of the
slow-timescale gap and the contraction modulus used by the schedule
calculator coincide (both equal its smallest eigenvalue).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log, sqrt

import numpy as np

from ttsa.config import RunTrace, TwoTimescaleConfig
from ttsa.errors import ResourceCapError, SupportError, ValidationError
from ttsa.linalg import guarded_inv, sym_eig_bounds
from ttsa.mdp import (
    MdpModel,
    MixingEstimate,
    PolicyTable,
    check_support,
    induced_chain,
    sample_trajectory,
    stationary_distribution,
)

MAX_BATCH = 10**8  # resource cap for schedule calculators


@dataclass(frozen=True)
class LinearFeatureMap:
    """Fixed state features, one row per state, ||phi(s)|| <= 1."""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float)
        if phi.ndim != 2:
            raise ValidationError("feature matrix must be 2-D (states x d)")
        if phi.shape[0] < phi.shape[1]:
            raise ValidationError("need at least d states for independent columns")
        norms = np.linalg.norm(phi, axis=1)
        if norms.max(initial=0.0) > 1.0 + 1e-12:
            raise ValidationError("feature rows must have 2-norm at most 1")
        smin = np.linalg.svd(phi, compute_uv=False)[-1]
        if smin <= 1e-10:
            raise ValidationError("feature columns must be linearly independent")
        object.__setattr__(self, "phi", phi)

    @property
    def d(self) -> int:
        return self.phi.shape[1]

    @staticmethod
    def tabular(n_states: int, scale: float = 1.0) -> "LinearFeatureMap":
        return LinearFeatureMap(scale * np.eye(n_states))

    @staticmethod
    def random(n_states: int, d: int, seed: int = 0) -> "LinearFeatureMap":
        from ttsa.rng import make_rng

        rng = make_rng(seed)
        phi = rng.standard_normal((n_states, d))
        norms = np.linalg.norm(phi, axis=1, keepdims=True)
        return LinearFeatureMap(phi / np.maximum(norms, 1.0))


@dataclass(frozen=True)
class LinearTdcExact:
    """Closed-form quantities of the off-policy evaluation problem."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Sigma: np.ndarray
    b: np.ndarray
    theta_star: np.ndarray
    lambda1: float
    lambda2: float
    rho_max: float
    R_theta: float
    mu: np.ndarray
    features: LinearFeatureMap
    gamma: float
    r_max: float
    Sigma_inv: np.ndarray
    N: np.ndarray  # E[phibar(s) phi(s)^T]; B = -gamma * N

    @property
    def d(self) -> int:
        return self.features.d


def build_linear_exact(
    mdp: MdpModel,
    behavior: PolicyTable,
    target: PolicyTable,
    features: LinearFeatureMap,
) -> LinearTdcExact:
    """Exact population matrices by summation over (s, a, s')."""
    check_support(target, behavior)
    if features.phi.shape[0] != mdp.n_states:
        raise ValidationError("feature map does not match the MDP state count")
    chain_b = induced_chain(mdp, behavior)
    mu = stationary_distribution(chain_b)
    P_pi = induced_chain(mdp, target)
    Phi = features.phi
    D = mu[:, None]

    r_bar_target = np.einsum("sa,sa->s", target.probs, mdp.expected_reward())
    phibar = P_pi @ Phi  # E_pi[phi(s') | s], row per s

    Sigma = Phi.T @ (D * Phi)
    A = Phi.T @ (D * (mdp.gamma * phibar - Phi))
    b = Phi.T @ (mu * r_bar_target)
    N = phibar.T @ (D * Phi)
    B = -mdp.gamma * N
    C = -Sigma

    Sigma_inv = guarded_inv(Sigma, "feature second-moment matrix")
    A_inv = guarded_inv(A, "TD matrix A")
    theta_star = -A_inv @ b

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(target.probs > 0, target.probs / behavior.probs, 0.0)
    if not np.isfinite(ratio).all():
        raise SupportError("importance ratio unbounded on a supported pair")
    rho_max = float(ratio.max())

    G = A.T @ Sigma_inv @ A  # symmetric PD; drives the slow-timescale contraction
    lambda1, _ = sym_eig_bounds(G)
    lambda2 = float(np.linalg.eigvalsh(Sigma)[0])
    R_theta = max(
        mdp.r_max / lambda1 if lambda1 > 0 else 0.0,
        float(np.linalg.norm(theta_star)),
    )

    return LinearTdcExact(
        A=A,
        B=B,
        C=C,
        Sigma=Sigma,
        b=b,
        theta_star=theta_star,
        lambda1=lambda1,
        lambda2=lambda2,
        rho_max=rho_max,
        R_theta=R_theta,
        mu=mu,
        features=features,
        gamma=mdp.gamma,
        r_max=mdp.r_max,
        Sigma_inv=Sigma_inv,
        N=N,
    )


def mspbe(exact: LinearTdcExact, theta: np.ndarray) -> float:
    """Mean-square projected Bellman error J(theta) >= 0."""
    resid = exact.A @ theta + exact.b
    return float(resid @ exact.Sigma_inv @ resid)


def w_of_theta(exact: LinearTdcExact, theta: np.ndarray) -> np.ndarray:
    """Fast-timescale fixed point w(theta) = Sigma^{-1} (A theta + b)."""
    return exact.Sigma_inv @ (exact.A @ theta + exact.b)


def tdc_gradient(exact: LinearTdcExact, theta: np.ndarray) -> np.ndarray:
    """Gradient of J: 2 A^T Sigma^{-1} (A theta + b) = 2 A^T w(theta)."""
    return 2.0 * exact.A.T @ w_of_theta(exact, theta)


def descent_direction(exact: LinearTdcExact, theta: np.ndarray) -> np.ndarray:
    """Population slow-timescale direction -grad J / 2, which equals the
    mean sampled update with the tracker held at w(theta)."""
    w = w_of_theta(exact, theta)
    return (exact.A @ theta + exact.b) - exact.gamma * exact.N @ w


def update_noise_second_moment(
    mdp: MdpModel,
    behavior: PolicyTable,
    target: PolicyTable,
    exact: LinearTdcExact,
    theta: np.ndarray | None = None,
    w: np.ndarray | None = None,
) -> float:
    """Exact E||g_j(theta, w)||^2 of the single-sample slow update under
    the stationary distribution; defaults to the fixed point, where the
    mean vanishes and this is the pure noise level driving the 1/M floor."""
    Phi = exact.features.phi
    if theta is None:
        theta = exact.theta_star
    if w is None:
        w = w_of_theta(exact, theta)
    v = Phi @ theta
    total = 0.0
    for s in range(mdp.n_states):
        ws = exact.mu[s]
        if ws == 0:
            continue
        phi_s = Phi[s]
        proj = float(phi_s @ w)
        for a in range(mdp.n_actions):
            pa = behavior.probs[s, a]
            if pa == 0:
                continue
            rho = target.probs[s, a] / pa
            if rho == 0.0:
                continue
            for s2 in np.nonzero(mdp.transition[s, a])[0]:
                p = mdp.transition[s, a, s2]
                delta = mdp.reward[s, a, s2] + mdp.gamma * v[s2] - v[s]
                g = rho * (delta * phi_s - mdp.gamma * proj * Phi[s2])
                total += ws * pa * p * float(g @ g)
    return total


def importance_ratios(
    behavior: PolicyTable, target: PolicyTable, s: np.ndarray, a: np.ndarray
) -> np.ndarray:
    pb = behavior.probs[s, a]
    if np.any(pb <= 0):
        raise SupportError("behavior policy has no mass on a visited pair")
    return target.probs[s, a] / pb


def linear_tdc_step(
    theta: np.ndarray,
    w: np.ndarray,
    batch,
    alpha: float,
    beta: float,
    gamma: float,
    features: LinearFeatureMap,
    behavior: PolicyTable,
    target: PolicyTable,
):
    """One mini-batch update on a contiguous batch (s, a, r, s2, a2).

    w'     = w + beta * mean_j(-phi_j phi_j^T w + rho_j delta_j phi_j)
    theta' = theta + alpha * mean_j rho_j (delta_j phi_j - gamma phi'_j phi_j^T w)
    with delta_j = r_j + gamma phi'_j^T theta - phi_j^T theta.
    """
    s, a, r, s2, _ = batch
    m = len(s)
    Phi = features.phi
    phi_s = Phi[s]
    phi_s2 = Phi[s2]
    rho = importance_ratios(behavior, target, s, a)

    delta = r + gamma * (phi_s2 @ theta) - phi_s @ theta
    phi_w = phi_s @ w
    w_dir = (-(phi_s.T @ phi_w) + phi_s.T @ (rho * delta)) / m
    theta_dir = (phi_s.T @ (rho * delta) - gamma * phi_s2.T @ (rho * phi_w)) / m
    return theta + alpha * theta_dir, w + beta * w_dir


def run_linear_tdc(
    mdp: MdpModel,
    behavior: PolicyTable,
    target: PolicyTable,
    features: LinearFeatureMap,
    config: TwoTimescaleConfig,
    exact: LinearTdcExact | None = None,
    theta0: np.ndarray | None = None,
    w0: np.ndarray | None = None,
) -> RunTrace:
    """Run T iterations on consecutive non-overlapping mini-batches.

    The trace scores every iterate with the exact oracles:
    ||theta_t - theta*||^2, ||w_t - w(theta_t)||^2, J(theta_t),
    ||grad J(theta_t)||^2.
    """
    if exact is None:
        exact = build_linear_exact(mdp, behavior, target, features)
    d = features.d
    theta = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    w = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float).copy()

    T, M = config.iterations, config.batch_size
    stream = sample_trajectory(mdp, behavior, config.seed, max(T * M, 1))

    theta_err = np.empty(T + 1)
    track_err = np.empty(T + 1)
    objective = np.empty(T + 1)
    grad_sq = np.empty(T + 1)

    def record(i, th, ww):
        theta_err[i] = np.sum((th - exact.theta_star) ** 2)
        track_err[i] = np.sum((ww - w_of_theta(exact, th)) ** 2)
        objective[i] = mspbe(exact, th)
        grad_sq[i] = np.sum(tdc_gradient(exact, th) ** 2)

    record(0, theta, w)
    for t in range(T):
        batch = stream.next_batch(M)
        theta, w = linear_tdc_step(
            theta, w, batch, config.alpha, config.beta, mdp.gamma,
            features, behavior, target,
        )
        record(t + 1, theta, w)

    ts = np.arange(T + 1)
    return RunTrace(
        algo="linear-tdc",
        seed=config.seed,
        batch_size=M,
        t=ts,
        samples=ts * M,
        tracking_err_sq=track_err,
        objective=objective,
        grad_norm_sq=grad_sq,
        theta_err_sq=theta_err,
        theta_final=theta,
        w_final=w,
    )


# --- schedule calculators ---------------------------------------------------


def compute_A1(
    exact: LinearTdcExact, mixing: MixingEstimate, alpha: float, beta: float
) -> float:
    """Worst-case variance constant of the convergence bound's 1/M floor."""
    l1, l2 = exact.lambda1, exact.lambda2
    lead = 256.0 * (4.0 * exact.R_theta**2 * exact.rho_max**2 + exact.r_max**2)
    lead /= min(l2 * beta, l1 * alpha)
    steps = (
        32.0 * alpha**2 / (l2**2 * beta)
        + 2.0 * beta / l2
        + 2.0 * beta**2
        + 2.0 * alpha / l1
        + 3.0 * alpha**2
    )
    return lead * steps * mixing.factor


def theorem1_bound(
    exact: LinearTdcExact,
    mixing: MixingEstimate,
    config: TwoTimescaleConfig,
    delta0: float,
) -> float:
    """Right-hand side of the convergence bound at iteration T."""
    rate = min(exact.lambda1 * config.alpha, exact.lambda2 * config.beta) / 8.0
    a1 = compute_A1(exact, mixing, config.alpha, config.beta)
    return (1.0 - rate) ** config.iterations * delta0 + a1 / config.batch_size


@dataclass(frozen=True)
class ScheduleReport:
    """A schedule plus the quantities that justify it."""

    config: TwoTimescaleConfig
    target_eps: float
    rate: float
    variance_constant: float
    delta0: float
    total_samples: int
    details: dict


def theorem1_config(
    exact: LinearTdcExact,
    mixing: MixingEstimate,
    target_eps: float,
    theta0: np.ndarray | None = None,
    w0: np.ndarray | None = None,
    seed: int = 0,
    max_batch: int = MAX_BATCH,
) -> ScheduleReport:
    """Literal worst-case schedule for a target accuracy.

    beta = min{1/(8 l2), l2/4}; alpha is the minimum of the six stated
    caps; M covers both the structural floor and 2*A1/eps; T covers the
    transient at the certified contraction rate.  The constants are
    worst-case certificates: schedules are valid but far from necessary,
    so use the practical schedule for actual runs.
    """
    if target_eps <= 0:
        raise ValidationError("target accuracy must be positive")
    l1, l2, rho = exact.lambda1, exact.lambda2, exact.rho_max
    beta = min(1.0 / (8.0 * l2), l2 / 4.0)
    alpha_terms = {
        "inv_8l1": 1.0 / (8.0 * l1),
        "l1l2_12": l1 * l2 / 12.0,
        "sqrt_term": sqrt(l2 * beta) / (4.0 * sqrt(6.0) * rho),
        "l2_15_term": l2 * sqrt(l2) * beta / (16.0 * rho**2),
        "l1l2beta": l1 * l2 * beta / (64.0 * rho**2),
        "l1l2sq": l1 * l2**2 * beta / 768.0,
    }
    alpha = min(alpha_terms.values())
    rate = min(l1 * alpha, l2 * beta)

    a1 = compute_A1(exact, mixing, alpha, beta)
    m_floor = (
        128.0
        * (rho**2 + 1.0 / l2**2)
        * mixing.factor
        * max(
            1.0,
            (8.0 * beta + 8.0 * l2 * beta**2) / (l1 * l2 * alpha),
            (8.0 + 12.0 * l1 * alpha) / l1,
        )
    )
    M = int(ceil(max(m_floor, 2.0 * a1 / target_eps)))
    if M > max_batch:
        raise ResourceCapError(
            f"required batch size {M} exceeds the configured cap {max_batch}"
        )

    d = exact.d
    th0 = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=float)
    ww0 = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float)
    delta0 = float(
        np.sum((th0 - exact.theta_star) ** 2)
        + np.sum((ww0 - w_of_theta(exact, th0)) ** 2)
    )
    T = int(ceil(8.0 / rate * log(max(2.0 * delta0 / target_eps, 1.0 + 1e-9))))

    config = TwoTimescaleConfig(alpha=alpha, beta=beta, batch_size=M, iterations=max(T, 1), seed=seed)
    return ScheduleReport(
        config=config,
        target_eps=target_eps,
        rate=rate,
        variance_constant=a1,
        delta0=delta0,
        total_samples=config.iterations * M,
        details={"alpha_terms": alpha_terms, "m_floor": m_floor},
    )


def practical_linear_config(
    exact: LinearTdcExact,
    mixing: MixingEstimate,
    target_eps: float,
    noise_second_moment: float | None = None,
    variance_scale: float = 4.0,
    seed: int = 0,
    max_batch: int = MAX_BATCH,
    theta0: np.ndarray | None = None,
    w0: np.ndarray | None = None,
) -> ScheduleReport:
    """Runnable schedule with the same shape as the certified one.

    Keeps constant stepsizes, M proportional to 1/eps and T logarithmic
    in 1/eps, but sizes the leading constants from the instance's actual
    curvature and noise level (pass the exact value from
    ``update_noise_second_moment``; a crude bound is used otherwise)
    instead of the worst-case certificates, which are orders of
    magnitude too conservative to simulate.
    """
    if target_eps <= 0:
        raise ValidationError("target accuracy must be positive")
    sig_max = float(np.linalg.eigvalsh(exact.Sigma)[-1])
    beta = 0.8 / sig_max
    G = exact.A.T @ exact.Sigma_inv @ exact.A
    g_max = float(np.linalg.eigvalsh(0.5 * (G + G.T))[-1])
    alpha = min(0.8 / g_max if g_max > 0 else beta, beta)
    rate = min(exact.lambda1 * alpha, exact.lambda2 * beta)

    if noise_second_moment is None:
        noise_second_moment = exact.rho_max**2 * (
            exact.r_max + 2.0 * np.linalg.norm(exact.theta_star)
        ) ** 2
    var_const = (
        variance_scale
        * alpha
        * noise_second_moment
        * mixing.factor
        / max(2.0 * exact.lambda1, 1e-12)
    )
    M = int(ceil(max(2.0 * var_const / target_eps, 8.0)))
    if M > max_batch:
        raise ResourceCapError(
            f"required batch size {M} exceeds the configured cap {max_batch}"
        )
    d = exact.d
    th0 = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=float)
    ww0 = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float)
    delta0 = float(
        np.sum((th0 - exact.theta_star) ** 2)
        + np.sum((ww0 - w_of_theta(exact, th0)) ** 2)
    )
    T = int(ceil(8.0 / rate * log(max(2.0 * delta0 / target_eps, 1.0 + 1e-9))))
    config = TwoTimescaleConfig(alpha=alpha, beta=beta, batch_size=M, iterations=max(T, 1), seed=seed)
    return ScheduleReport(
        config=config,
        target_eps=target_eps,
        rate=rate,
        variance_constant=var_const,
        delta0=delta0,
        total_samples=config.iterations * M,
        details={"mode": "practical"},
    )
