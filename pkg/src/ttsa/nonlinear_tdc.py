"""On-policy two-timescale TDC with smooth nonlinear value models.

A value model exposes v(s, theta), its parameter gradient phi_theta(s)
(the tangent features) and Hessian, plus declared bound/Lipschitz
constants valid inside a stated parameter ball.  Exact oracles evaluate
the population objective, tracker fixed point, curvature-correction
term and gradient by finite sums under the on-policy stationary
distribution; the gradient identity

    -grad J / 2 = E[delta phi] - gamma E[phi' phi^T] w(theta) - h(theta, w(theta))

is exact for exact w(theta), which the finite-difference tests pin down.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil, sqrt

import numpy as np

from ttsa.config import RunTrace, TwoTimescaleConfig
from ttsa.errors import ResourceCapError, ValidationError
from ttsa.linalg import guarded_solve
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
class DifferentiableValueModel:
    """Smooth value approximator with declared regularity constants.

    Evaluators are vectorized over states and must be pure.  Declared
    constants (feature/value/Hessian bounds, Lipschitz moduli, Gram
    floor) are certified inside ||theta|| <= theta_radius; probes and
    runtime guards check them there.
    """

    d: int
    value: callable  # (states, theta) -> (m,)
    grad: callable  # (states, theta) -> (m, d)
    hess: callable  # (states, theta) -> (m, d, d)
    C_phi: float
    C_v: float
    D_v: float
    L_v: float
    L_phi: float
    L_h: float
    lambda_v: float
    theta_radius: float
    kind: str = "custom"
    hess_vec: callable | None = None  # (states, theta, u) -> (m, d), optional fast path

    def hessian_times(self, states, theta, u):
        if self.hess_vec is not None:
            return self.hess_vec(states, theta, u)
        return self.hess(states, theta) @ u


def make_linear_model(
    base_features: np.ndarray, lambda_v: float, theta_radius: float = 10.0
) -> DifferentiableValueModel:
    """Linear model v = psi^T theta; zero Hessian, constant features."""
    psi = np.asarray(base_features, dtype=float)
    d = psi.shape[1]
    max_norm = float(np.linalg.norm(psi, axis=1).max())

    def value(states, theta):
        return psi[states] @ theta

    def grad(states, theta):
        return psi[states].copy()

    def hess(states, theta):
        return np.zeros((len(states), d, d))

    def hess_vec(states, theta, u):
        return np.zeros((len(states), d))

    return DifferentiableValueModel(
        d=d,
        value=value,
        grad=grad,
        hess=hess,
        C_phi=max_norm,
        C_v=max_norm * theta_radius,
        D_v=0.0,
        L_v=max_norm,
        L_phi=0.0,
        L_h=0.0,
        lambda_v=lambda_v,
        theta_radius=theta_radius,
        kind="linear",
        hess_vec=hess_vec,
    )


def make_tanh_linear_model(
    base_features: np.ndarray,
    c: float,
    kappa_lin: float,
    lambda_psi: float,
    theta_radius: float = 5.0,
) -> DifferentiableValueModel:
    """v(s, theta) = c tanh(psi^T theta) + kappa_lin psi^T theta.

    The linear term keeps the tangent-feature Gram uniformly positive
    definite (floor kappa_lin^2 * lambda_psi), while the tanh term
    supplies bounded smooth nonlinearity with closed-form Hessian.
    ``lambda_psi`` is the smallest eigenvalue of the stationary base
    Gram E[psi psi^T] under the sampling policy.
    """
    psi = np.asarray(base_features, dtype=float)
    d = psi.shape[1]
    max_norm = float(np.linalg.norm(psi, axis=1).max())

    def value(states, theta):
        u = psi[states] @ theta
        return c * np.tanh(u) + kappa_lin * u

    def grad(states, theta):
        u = psi[states] @ theta
        m = c * (1.0 - np.tanh(u) ** 2) + kappa_lin
        return m[:, None] * psi[states]

    def curvature(states, theta):
        u = psi[states] @ theta
        t = np.tanh(u)
        return -2.0 * c * t * (1.0 - t**2)

    def hess(states, theta):
        q = curvature(states, theta)
        rows = psi[states]
        return q[:, None, None] * rows[:, :, None] * rows[:, None, :]

    def hess_vec(states, theta, u_vec):
        q = curvature(states, theta)
        rows = psi[states]
        return (q * (rows @ u_vec))[:, None] * rows

    # |tanh'(u)| <= 1; max |t (1 - t^2)| = 2 / (3 sqrt(3))
    hump = 2.0 / (3.0 * sqrt(3.0))
    return DifferentiableValueModel(
        d=d,
        value=value,
        grad=grad,
        hess=hess,
        C_phi=(c + kappa_lin) * max_norm,
        C_v=c + kappa_lin * max_norm * theta_radius,
        D_v=2.0 * c * hump * max_norm**2,
        L_v=(c + kappa_lin) * max_norm,
        L_phi=2.0 * c * hump * max_norm**2,
        L_h=2.0 * c * max_norm**3,
        lambda_v=kappa_lin**2 * lambda_psi,
        theta_radius=theta_radius,
        kind="tanh-linear",
        hess_vec=hess_vec,
    )


def make_model_from_spec(spec: dict, mdp: MdpModel, policy: PolicyTable) -> DifferentiableValueModel:
    """Build a model from a config mapping ({"kind": "tanh-linear", ...})."""
    kind = spec.get("kind")
    d = int(spec.get("d", 4))
    base_seed = int(spec.get("base_seed", 0))
    rng = make_rng(base_seed)
    psi = rng.standard_normal((mdp.n_states, d))
    psi /= np.maximum(np.linalg.norm(psi, axis=1, keepdims=True), 1.0)
    mu = stationary_distribution(induced_chain(mdp, policy))
    lambda_psi = float(np.linalg.eigvalsh(psi.T @ (mu[:, None] * psi))[0])
    if kind == "linear":
        return make_linear_model(psi, lambda_v=lambda_psi)
    if kind == "tanh-linear":
        return make_tanh_linear_model(
            psi,
            c=float(spec.get("c", 0.2)),
            kappa_lin=float(spec.get("kappa_lin", 1.0)),
            lambda_psi=lambda_psi,
            theta_radius=float(spec.get("theta_radius", 5.0)),
        )
    raise ValidationError(f"unknown model kind: {kind!r}")


@dataclass(frozen=True)
class NonlinearExact:
    """Population evaluators under the on-policy stationary distribution."""

    mdp: MdpModel
    policy: PolicyTable
    model: DifferentiableValueModel
    mu: np.ndarray
    chain: np.ndarray
    r_bar: np.ndarray  # E[r | s] under the policy

    @property
    def states(self) -> np.ndarray:
        return np.arange(self.mdp.n_states)

    def gram(self, theta: np.ndarray) -> np.ndarray:
        phi = self.model.grad(self.states, theta)
        return phi.T @ (self.mu[:, None] * phi)

    def mean_td(self, theta: np.ndarray) -> np.ndarray:
        """E[delta(theta) | s] for every s."""
        v = self.model.value(self.states, theta)
        return self.r_bar + self.mdp.gamma * self.chain @ v - v

    def drift(self, theta: np.ndarray) -> np.ndarray:
        phi = self.model.grad(self.states, theta)
        return phi.T @ (self.mu * self.mean_td(theta))

    def cross(self, theta: np.ndarray) -> np.ndarray:
        """E[phi(s') phi(s)^T]."""
        phi = self.model.grad(self.states, theta)
        return (self.chain @ phi).T @ (self.mu[:, None] * phi)

    @property
    def R_w(self) -> float:
        m = self.model
        return m.C_phi * (self.mdp.r_max + 2.0 * m.C_v) / m.lambda_v


def build_nonlinear_exact(
    mdp: MdpModel, policy: PolicyTable, model: DifferentiableValueModel
) -> NonlinearExact:
    chain = induced_chain(mdp, policy)
    mu = stationary_distribution(chain)
    r_bar = np.einsum("sa,sa->s", policy.probs, mdp.expected_reward())
    return NonlinearExact(mdp=mdp, policy=policy, model=model, mu=mu, chain=chain, r_bar=r_bar)


def w_of_theta_nl(exact: NonlinearExact, theta: np.ndarray) -> np.ndarray:
    """Tracker fixed point: Gram(theta) w = drift(theta)."""
    return guarded_solve(exact.gram(theta), exact.drift(theta), "tangent-feature Gram")


def h_term(
    exact: NonlinearExact,
    theta: np.ndarray,
    u: np.ndarray,
    batch=None,
) -> np.ndarray:
    """Curvature correction E[(delta - phi^T u) Hess v * u].

    With ``batch`` given, returns the per-sample form averaged over the
    batch instead of the population sum.
    """
    model = exact.model
    if batch is None:
        states = exact.states
        resid = exact.mean_td(theta) - model.grad(states, theta) @ u
        hv = model.hessian_times(states, theta, u)
        return hv.T @ (exact.mu * resid)
    s, a, r, s2, _ = batch
    v_s = model.value(s, theta)
    v_s2 = model.value(s2, theta)
    delta = r + exact.mdp.gamma * v_s2 - v_s
    resid = delta - model.grad(s, theta) @ u
    hv = model.hessian_times(s, theta, u)
    return (hv * resid[:, None]).mean(axis=0)


def nonlinear_J(exact: NonlinearExact, theta: np.ndarray) -> float:
    """Projected Bellman error onto the tangent space at theta."""
    drift = exact.drift(theta)
    w = guarded_solve(exact.gram(theta), drift, "tangent-feature Gram")
    return float(drift @ w)


def nonlinear_grad(exact: NonlinearExact, theta: np.ndarray) -> np.ndarray:
    """Gradient of J via the correction identity (matches finite differences)."""
    w = w_of_theta_nl(exact, theta)
    half_neg = exact.drift(theta) - exact.mdp.gamma * exact.cross(theta) @ w - h_term(
        exact, theta, w
    )
    return -2.0 * half_neg


def update_noise_second_moment(
    exact: NonlinearExact, theta: np.ndarray | None = None, w: np.ndarray | None = None
) -> float:
    """Exact E||g_j(theta, w)||^2 of the single-sample slow update; sizes
    practical batch schedules."""
    model = exact.model
    if theta is None:
        theta = np.zeros(model.d)
    if w is None:
        w = w_of_theta_nl(exact, theta)
    states = exact.states
    v = model.value(states, theta)
    phi = model.grad(states, theta)
    hv = model.hessian_times(states, theta, w)
    proj = phi @ w
    mdp, policy = exact.mdp, exact.policy
    total = 0.0
    for s in range(mdp.n_states):
        ws = exact.mu[s]
        if ws == 0:
            continue
        for a in range(mdp.n_actions):
            pa = policy.probs[s, a]
            if pa == 0:
                continue
            for s2 in np.nonzero(mdp.transition[s, a])[0]:
                p = mdp.transition[s, a, s2]
                delta = mdp.reward[s, a, s2] + mdp.gamma * v[s2] - v[s]
                g = delta * phi[s] - mdp.gamma * proj[s] * phi[s2] - (delta - proj[s]) * hv[s]
                total += ws * pa * p * float(g @ g)
    return total


def nonlinear_tdc_step(
    theta: np.ndarray,
    w: np.ndarray,
    batch,
    alpha: float,
    beta: float,
    gamma: float,
    model: DifferentiableValueModel,
):
    """One mini-batch update of Algorithm-style nonlinear TDC.

    w'     = w + beta * mean(-phi phi^T w + delta phi)
    theta' = theta + alpha * mean(delta phi - gamma phi' phi^T w - h_j(theta, w))
    with delta_j from value evaluations (not feature dot products).
    """
    s, a, r, s2, _ = batch
    m = len(s)
    phi_s = model.grad(s, theta)
    phi_s2 = model.grad(s2, theta)
    v_s = model.value(s, theta)
    v_s2 = model.value(s2, theta)
    delta = r + gamma * v_s2 - v_s

    phi_w = phi_s @ w
    w_dir = (phi_s.T @ (delta - phi_w)) / m
    hv = model.hessian_times(s, theta, w)
    h_j = hv * (delta - phi_w)[:, None]
    theta_dir = (phi_s.T @ delta - gamma * phi_s2.T @ phi_w) / m - h_j.mean(axis=0)
    return theta + alpha * theta_dir, w + beta * w_dir


def run_nonlinear_tdc(
    mdp: MdpModel,
    policy: PolicyTable,
    model: DifferentiableValueModel,
    config: TwoTimescaleConfig,
    exact: NonlinearExact | None = None,
    theta0: np.ndarray | None = None,
    w0: np.ndarray | None = None,
) -> RunTrace:
    """On-policy run; returns the trace with a uniformly drawn output index.

    Gram eigenvalues are guarded along the path: dropping below half the
    declared floor is recorded as an assumption violation (the run
    continues; the guarantees are void in that regime).
    """
    if exact is None:
        exact = build_nonlinear_exact(mdp, policy, model)
    d = model.d
    theta = np.zeros(d) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    w = np.zeros(d) if w0 is None else np.asarray(w0, dtype=float).copy()
    T, M = config.iterations, config.batch_size
    stream = sample_trajectory(mdp, policy, config.seed, max(T * M, 1))

    track_err = np.empty(T + 1)
    objective = np.empty(T + 1)
    grad_sq = np.empty(T + 1)
    thetas = np.empty((T + 1, d))
    violations: list[str] = []

    def record(i, th, ww):
        thetas[i] = th
        gram_min = float(np.linalg.eigvalsh(exact.gram(th))[0])
        if gram_min < model.lambda_v / 2.0:
            violations.append(
                f"t={i}: Gram eigenvalue {gram_min:.3e} below half the declared floor"
            )
        track_err[i] = np.sum((ww - w_of_theta_nl(exact, th)) ** 2)
        objective[i] = nonlinear_J(exact, th)
        grad_sq[i] = np.sum(nonlinear_grad(exact, th) ** 2)

    record(0, theta, w)
    for t in range(T):
        batch = stream.next_batch(M)
        theta, w = nonlinear_tdc_step(
            theta, w, batch, config.alpha, config.beta, mdp.gamma, model
        )
        record(t + 1, theta, w)

    output_index = stream.draw_index(1, T + 1) if T >= 1 else 0

    ts = np.arange(T + 1)
    return RunTrace(
        algo="nonlinear-tdc",
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


# --- regularity constants and schedules -------------------------------------


@dataclass(frozen=True)
class SmoothnessLedger:
    """Regularity constants entering the nonconvex schedule calculator."""

    L_J: float
    L_e: float
    L_w: float
    C_g: float
    C_f: float
    R_w: float

    def __post_init__(self):
        for name in ("L_J", "L_e", "L_w", "C_g", "C_f", "R_w"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")


def compute_Lw(
    C_phi: float, C_v: float, L_v: float, L_phi: float, lambda_v: float,
    r_max: float, gamma: float,
) -> float:
    """Lipschitz modulus of theta -> w(theta)."""
    bound = r_max + (1.0 + gamma) * C_v
    return (2.0 * C_phi * L_phi / lambda_v**2) * bound + (
        L_v * C_phi * (1.0 + gamma) + L_phi * bound
    ) / lambda_v


def compute_Cg(
    C_phi: float, C_v: float, D_v: float, R_w: float, r_max: float, gamma: float
) -> float:
    """Bound on the sampled update direction at w = w(theta)."""
    td = r_max + (gamma + 1.0) * C_v
    return td * C_phi + gamma * C_phi**2 * R_w + (td + C_phi * R_w) * D_v * R_w


def compute_Cf(C_phi: float, C_v: float, R_w: float, r_max: float) -> float:
    """Bound entering the tracker's batch-noise constant."""
    return 6.0 * (C_phi**2 * (r_max + 2.0 * C_v) ** 2 + C_phi**4 * R_w)


def compute_D1(
    ledger: SmoothnessLedger, lambda_v: float, alpha: float, beta: float
) -> float:
    return 128.0 * ledger.L_w**2 * ledger.C_g**2 * alpha**2 / (lambda_v * beta) + (
        4.0 * ledger.C_f**2 * (beta / lambda_v + 2.0 * beta**2)
    )


def theorem2_bound(
    ledger: SmoothnessLedger,
    lambda_v: float,
    mixing: MixingEstimate,
    config: TwoTimescaleConfig,
    J0: float,
    JT: float,
    w_gap0_sq: float,
) -> float:
    """Right-hand side of the stationarity bound for a finished run."""
    alpha, beta = config.alpha, config.beta
    b1 = 64.0 * (1.0 + ledger.L_J * alpha) * ledger.L_e**2 / (lambda_v * beta)
    d1 = compute_D1(ledger, lambda_v, alpha, beta)
    b2 = (
        64.0
        * (1.0 + ledger.L_J * alpha)
        * (ledger.C_g**2 + 2.0 * d1 * ledger.L_e**2 / (lambda_v * beta))
        * mixing.factor
    )
    return (
        8.0 * (J0 - JT) / (alpha * config.iterations)
        + b1 * w_gap0_sq / config.iterations
        + b2 / config.batch_size
    )


def theorem2_config(
    ledger: SmoothnessLedger,
    model: DifferentiableValueModel,
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
    lam = model.lambda_v
    beta = min(lam / (8.0 * model.C_phi**4), 8.0 / lam)
    alpha_terms = {
        "inv_2LJ": 1.0 / (2.0 * ledger.L_J),
        "tracking": lam * beta / (8.0 * sqrt(2.0) * ledger.L_w * ledger.L_e),
        "cubic": ledger.L_J * lam**2 * beta**2 / (384.0 * ledger.L_w**2 * ledger.L_e**2),
    }
    alpha = min(alpha_terms.values())
    b1 = 64.0 * (1.0 + ledger.L_J * alpha) * ledger.L_e**2 / (lam * beta)
    d1 = compute_D1(ledger, lam, alpha, beta)
    b2 = (
        64.0
        * (1.0 + ledger.L_J * alpha)
        * (ledger.C_g**2 + 2.0 * d1 * ledger.L_e**2 / (lam * beta))
        * mixing.factor
    )
    M = int(ceil(2.0 * b2 / target_eps))
    if M > max_batch:
        raise ResourceCapError(
            f"required batch size {M} exceeds the configured cap {max_batch}"
        )
    T = int(ceil((2.0 / target_eps) * (8.0 * J0 / alpha + b1 * w_gap0_sq)))
    config = TwoTimescaleConfig(
        alpha=min(alpha, beta), beta=beta, batch_size=M, iterations=max(T, 1), seed=seed
    )
    return ScheduleReport(
        config=config,
        target_eps=target_eps,
        rate=lam * beta / 8.0,
        variance_constant=b2,
        delta0=J0,
        total_samples=config.iterations * M,
        details={"alpha_terms": alpha_terms, "B1": b1, "B2": b2, "D1": d1,
                 "alpha_unclamped": alpha},
    )


# --- empirical certification of declared constants ---------------------------


@dataclass
class ConstantsReport:
    """Empirical maxima/minima and difference-quotient estimates."""

    C_phi: float
    C_v: float
    D_v: float
    lambda_v: float
    L_v: float
    L_phi: float
    L_h: float
    L_J: float
    L_e: float
    L_w: float  # empirical tracker-fixed-point modulus (difference quotients)
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def estimate_model_constants(
    model: DifferentiableValueModel,
    mdp: MdpModel,
    policy: PolicyTable,
    theta_grid: np.ndarray,
    exact: NonlinearExact | None = None,
) -> ConstantsReport:
    """Probe declared constants on a theta grid; flag violations.

    Violations are reported, not raised: the caller decides whether the
    run is meaningful outside the certified regime.
    """
    if exact is None:
        exact = build_nonlinear_exact(mdp, policy, model)
    states = exact.states
    thetas = np.atleast_2d(np.asarray(theta_grid, dtype=float))

    c_phi = c_v = d_v = 0.0
    lam_v = np.inf
    for th in thetas:
        phi = model.grad(states, th)
        c_phi = max(c_phi, float(np.linalg.norm(phi, axis=1).max()))
        c_v = max(c_v, float(np.abs(model.value(states, th)).max()))
        H = model.hess(states, th)
        d_v = max(d_v, float(np.sqrt((H**2).sum(axis=(1, 2))).max()))
        lam_v = min(lam_v, float(np.linalg.eigvalsh(exact.gram(th))[0]))

    l_v = l_phi = l_h = l_j = l_w_emp = 0.0
    grads = [nonlinear_grad(exact, th) for th in thetas]
    trackers = [w_of_theta_nl(exact, th) for th in thetas]
    for i in range(len(thetas)):
        for j in range(i + 1, len(thetas)):
            gap = float(np.linalg.norm(thetas[i] - thetas[j]))
            if gap < 1e-12:
                continue
            l_w_emp = max(
                l_w_emp, float(np.linalg.norm(trackers[i] - trackers[j])) / gap
            )
            dv = float(
                np.abs(
                    model.value(states, thetas[i]) - model.value(states, thetas[j])
                ).max()
            )
            dphi = float(
                np.linalg.norm(
                    model.grad(states, thetas[i]) - model.grad(states, thetas[j]),
                    axis=1,
                ).max()
            )
            Hi = model.hess(states, thetas[i])
            Hj = model.hess(states, thetas[j])
            dh = float(np.sqrt(((Hi - Hj) ** 2).sum(axis=(1, 2))).max())
            l_v = max(l_v, dv / gap)
            l_phi = max(l_phi, dphi / gap)
            l_h = max(l_h, dh / gap)
            l_j = max(l_j, float(np.linalg.norm(grads[i] - grads[j])) / gap)

    # L_e: sensitivity of the sampled direction to the tracker, probed on
    # w pairs inside the R_w ball at each grid theta.
    rng = make_rng(0)
    l_e = 0.0
    r_w = exact.R_w
    gamma = mdp.gamma
    for th in thetas[: min(len(thetas), 8)]:
        phi = model.grad(states, th)
        for _ in range(8):
            w1 = rng.standard_normal(model.d)
            w2 = rng.standard_normal(model.d)
            w1 *= r_w / max(np.linalg.norm(w1), 1e-12)
            w2 *= r_w / max(np.linalg.norm(w2), 1e-12)
            dtd = exact.mean_td(th)
            for s in range(mdp.n_states):
                hv1 = model.hessian_times(np.array([s]), th, w1)[0]
                hv2 = model.hessian_times(np.array([s]), th, w2)[0]
                g1 = -gamma * (exact.chain[s] @ phi) * (phi[s] @ w1) - (
                    (dtd[s] - phi[s] @ w1) * hv1
                )
                g2 = -gamma * (exact.chain[s] @ phi) * (phi[s] @ w2) - (
                    (dtd[s] - phi[s] @ w2) * hv2
                )
                gap = float(np.linalg.norm(w1 - w2))
                if gap > 1e-12:
                    l_e = max(l_e, float(np.linalg.norm(g1 - g2)) / gap)

    report = ConstantsReport(
        C_phi=c_phi, C_v=c_v, D_v=d_v, lambda_v=lam_v,
        L_v=l_v, L_phi=l_phi, L_h=l_h, L_J=l_j, L_e=l_e, L_w=l_w_emp,
    )
    tol = 1e-9
    checks = [
        ("C_phi", c_phi, model.C_phi),
        ("C_v", c_v, model.C_v),
        ("D_v", d_v, model.D_v),
        ("L_v", l_v, model.L_v),
        ("L_phi", l_phi, model.L_phi),
        ("L_h", l_h, model.L_h),
    ]
    for name, measured, declared in checks:
        if measured > declared * (1 + 1e-6) + tol:
            report.violations.append(
                f"{name}: measured {measured:.6g} exceeds declared {declared:.6g}"
            )
    if lam_v < model.lambda_v - tol:
        report.violations.append(
            f"lambda_v: measured floor {lam_v:.6g} below declared {model.lambda_v:.6g}"
        )
    return report


def ledger_from_report(
    report: ConstantsReport, model: DifferentiableValueModel, exact: NonlinearExact,
    safety: float = 2.0,
) -> SmoothnessLedger:
    """Assemble schedule constants; numerically estimated moduli are
    inflated by a safety factor."""
    r_w = exact.R_w
    r_max, gamma = exact.mdp.r_max, exact.mdp.gamma
    return SmoothnessLedger(
        L_J=safety * max(report.L_J, 1e-12),
        L_e=safety * max(report.L_e, 1e-12),
        L_w=compute_Lw(
            model.C_phi, model.C_v, model.L_v, model.L_phi, model.lambda_v,
            r_max, gamma,
        ),
        C_g=compute_Cg(model.C_phi, model.C_v, model.D_v, r_w, r_max, gamma),
        C_f=compute_Cf(model.C_phi, model.C_v, r_w, r_max),
        R_w=r_w,
    )
