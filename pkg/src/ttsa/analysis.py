"""Empirical verification of the variance lemma, contraction rates,
tracking-error recursions, and sample-complexity scaling laws."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt

import numpy as np

from ttsa.config import RunTrace, TwoTimescaleConfig
from ttsa.errors import InsufficientSignalError, ValidationError
from ttsa.mdp import MixingEstimate, simulate_chain_batch
from ttsa.rng import make_rng


@dataclass(frozen=True)
class VarianceProbeResult:
    """Empirical vs bound mini-batch deviation, per batch size."""

    batch_sizes: list
    empirical: list  # E ||X(M) - Xbar||^2
    std_err: list  # standard error of each empirical mean
    bound: list  # 8 C_x^2 (1 + (kappa-1) rho) / ((1-rho) M)
    reps: int
    C_x: float

    def __post_init__(self):
        n = len(self.batch_sizes)
        if not (len(self.empirical) == len(self.bound) == len(self.std_err) == n):
            raise ValidationError("probe result lists must align")
        if any(v < 0 for v in self.empirical) or any(v < 0 for v in self.bound):
            raise ValidationError("probe values must be nonnegative")

    def satisfied(self, n_sigma: float = 3.0) -> bool:
        return all(
            e - n_sigma * s <= b
            for e, s, b in zip(self.empirical, self.std_err, self.bound)
        )


@dataclass(frozen=True)
class RateFit:
    """Least-squares line in log space."""

    slope: float
    intercept: float
    r_squared: float
    factor: float | None = None  # exp(slope) when fitting a per-step contraction

    def __post_init__(self):
        if not (-1e-9 <= self.r_squared <= 1.0 + 1e-9):
            raise ValidationError("r_squared must lie in [0, 1]")


def _loglog_fit(x: np.ndarray, y: np.ndarray) -> RateFit:
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), min(max(r2, 0.0), 1.0))


def batch_variance_probe(
    chain: np.ndarray,
    mu: np.ndarray,
    X: np.ndarray,
    batch_sizes,
    reps: int,
    seed: int,
    mixing: MixingEstimate,
    stationary_start: bool = True,
) -> VarianceProbeResult:
    """Mean-square deviation of window averages of X(s) along the chain.

    X is a state-indexed array (vector or matrix per state).  Windows
    start from the stationary distribution by default, which isolates
    the mixing constant; pass ``stationary_start=False`` to start every
    window from state 0 instead.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] != len(mu):
        raise ValidationError("X must be indexed by state")
    flat = X.reshape(X.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1)
    c_x = float(norms.max())
    target = mu @ flat

    rng = make_rng(seed)
    empirical, std_err, bound = [], [], []
    for m in batch_sizes:
        if stationary_start:
            starts = rng.choice(len(mu), size=reps, p=mu)
        else:
            starts = np.zeros(reps, dtype=np.int64)
        paths = simulate_chain_batch(chain, starts, int(m), rng)
        sums = flat[paths].mean(axis=1)  # (reps, dim)
        dev = ((sums - target) ** 2).sum(axis=1)
        empirical.append(float(dev.mean()))
        std_err.append(float(dev.std(ddof=1) / sqrt(reps)))
        bound.append(8.0 * c_x**2 * mixing.factor / int(m))
    return VarianceProbeResult(
        batch_sizes=list(batch_sizes),
        empirical=empirical,
        std_err=std_err,
        bound=bound,
        reps=reps,
        C_x=c_x,
    )


def fit_contraction(trace, burn_in: int = 0) -> RateFit:
    """Per-iteration contraction factor of a decaying error sequence.

    Accepts a linear-TDC RunTrace (uses theta error + tracking error) or
    a plain sequence.  The noise floor is taken as the tail average of
    the last 20% of iterations, but only subtracted when the tail has
    actually flattened; a still-decaying tail means no floor.  The fit
    uses log(delta_t - floor) on the early window where the subtraction
    is benign.
    """
    if isinstance(trace, RunTrace):
        series = trace.delta()
    else:
        series = np.asarray(trace, dtype=float)
    n = len(series)
    if burn_in >= n - 2:
        raise InsufficientSignalError("trace too short for the requested burn-in")

    tail = series[int(0.8 * n):]
    if len(tail) < 2:
        raise InsufficientSignalError("trace too short to estimate a floor")
    half = len(tail) // 2
    first, second = tail[:half].mean(), tail[half:].mean()
    decaying = second > 0 and first / max(second, 1e-300) > 1.5
    floor = 0.0 if decaying else float(tail.mean())

    resid = series - floor
    head = resid[burn_in]
    if head <= 1e-9 * max(float(np.abs(series).max()), abs(floor)):
        raise InsufficientSignalError("series is floor-dominated after burn-in")
    # fit only the contiguous initial descent; once the series first dips
    # into floor noise, later excursions above the threshold are noise too
    cutoff = n
    for t in range(burn_in, n):
        if resid[t] <= max(0.05 * head, 0.0):
            cutoff = t
            break
    keep = np.arange(burn_in, cutoff)
    if len(keep) < 5:
        raise InsufficientSignalError("fewer than 5 usable points above the floor")
    t = keep.astype(float)
    ly = np.log(resid[keep])
    slope, intercept = np.polyfit(t, ly, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), min(max(r2, 0.0), 1.0), factor=float(np.exp(slope)))


@dataclass(frozen=True)
class RecursionReport:
    """Outcome of a per-step tracking-error inequality over an ensemble."""

    satisfied_fraction: float
    worst_violation: float  # max over t of (lhs - rhs), 0 when all hold
    checked: int
    stepsize_compliant: bool

    @property
    def ok(self) -> bool:
        return self.satisfied_fraction >= 0.9


def _seed_average(traces: list[RunTrace], attr: str) -> np.ndarray:
    return np.mean([getattr(tr, attr) for tr in traces], axis=0)


def tracking_recursion_check(
    traces: list[RunTrace],
    constants: dict,
    which: str,
    mixing: MixingEstimate,
    config: TwoTimescaleConfig,
    noise_term: float | None = None,
    capped: bool = False,
) -> RecursionReport:
    """Check the per-step tracking-error inequality on seed averages.

    which="linear" uses the coupled recursion
        x_{t+1} <= (1 - l2 b/4 + 16 rho^2 a^2/(l2^2 b)) x_t
                   + (96 a^2/(l2^2 b) + l1 a / 4) e_t + noise/M,
    with x = tracking error, e = theta error.  which="nonlinear" uses
        x_{t+1} <= (1 - lv b/8) x_t + (2 Lw^2 a^2/(lv b)) g_t + D1 mix/M,
    with g = squared gradient norm.  Constants come from the exact
    oracles / smoothness ledger.

    The worst-case forms are one-sided certificates: their additive
    noise constants are enormous and the linear contraction coefficient
    grows with alpha^2, so no stepsize, however broken, can violate
    them.  ``capped=True`` switches to the inequality the stepsize caps
    actually certify (contraction 1 - l2 b/8 with coupling 3 l1 a/8 for
    linear; the lemma form unchanged for nonlinear), and ``noise_term``
    substitutes a calibrated per-step noise level; together they give
    the falsifiable check that an oversized-alpha regime visibly
    violates.  The report also states whether the stepsizes satisfy the
    inequality's own preconditions, so non-compliance is flagged even
    when slack hides it.
    """
    if len(traces) < 1:
        raise ValidationError("need at least one trace")
    a, bta, M = config.alpha, config.beta, config.batch_size
    mixf = mixing.factor
    x = _seed_average(traces, "tracking_err_sq")

    if which == "linear":
        l1, l2 = constants["lambda1"], constants["lambda2"]
        rho, r_theta, r_max = constants["rho_max"], constants["R_theta"], constants["r_max"]
        e = _seed_average(traces, "theta_err_sq")
        if capped:
            coef_x = 1.0 - l2 * bta / 8.0
            coef_e = 3.0 * l1 * a / 8.0
        else:
            coef_x = 1.0 - l2 * bta / 4.0 + 16.0 * rho**2 * a**2 / (l2**2 * bta)
            coef_e = 96.0 * a**2 / (l2**2 * bta) + l1 * a / 4.0
        noise = (
            32.0
            * (4.0 * r_theta**2 * rho**2 + r_max**2)
            * (32.0 * a**2 / (l2**2 * bta) + 2.0 * bta / l2 + 2.0 * bta**2)
            * mixf
            / M
        ) if noise_term is None else noise_term
        rhs = coef_x * x[:-1] + coef_e * e[:-1] + noise
        compliant = (
            a <= 1.0 / (8.0 * l1) + 1e-12
            and bta <= min(1.0 / (8.0 * l2), l2 / 4.0) * (1.0 + 1e-9)
        )
    elif which == "nonlinear":
        lv, l_w, d1 = constants["lambda_v"], constants["L_w"], constants["D1"]
        grad = _seed_average(traces, "grad_norm_sq")
        coef_x = 1.0 - lv * bta / 8.0
        noise = d1 * mixf / M if noise_term is None else noise_term
        rhs = coef_x * x[:-1] + (2.0 * l_w**2 * a**2 / (lv * bta)) * grad[:-1] + noise
        l_e = constants.get("L_e", 0.0)
        compliant = (
            bta <= min(lv / (8.0 * constants["C_phi"] ** 4), 8.0 / lv) * (1 + 1e-9)
            and (l_w * l_e == 0 or a <= lv * bta / (8.0 * sqrt(2.0) * l_w * l_e) * (1 + 1e-9))
        )
    else:
        raise ValidationError(f"unknown recursion kind: {which!r}")

    lhs = x[1:]
    finite = np.isfinite(lhs) & np.isfinite(rhs)
    holds = finite & (lhs <= rhs * (1.0 + 1e-12))
    diffs = np.where(finite, lhs - rhs, np.inf)
    worst = float(np.clip(diffs, 0.0, None).max(initial=0.0))
    return RecursionReport(
        satisfied_fraction=float(holds.mean()),
        worst_violation=worst,
        checked=len(holds),
        stepsize_compliant=bool(compliant),
    )


@dataclass(frozen=True)
class SweepResult:
    """Measured sample cost per target accuracy plus the log-log fit."""

    eps: list
    tm: list
    achieved: list  # False entries mean the accuracy was not reached (partial)
    fit: RateFit

    @property
    def complete(self) -> bool:
        return all(self.achieved)


def complexity_sweep(runner, eps_list, seeds) -> SweepResult:
    """Measure samples-to-accuracy across targets.

    ``runner`` supplies ``configure(eps) -> TwoTimescaleConfig`` and
    ``metric_curve(trace) -> array over t`` (the theorem's own success
    metric: final-iterate error for evaluation, running average of the
    squared gradient norm for the uniform-output algorithms).  For each
    target the seed-averaged curve's first crossing below eps gives the
    measured TM = t_cross * M; targets never reached are flagged.
    """
    eps_list = sorted(eps_list, reverse=True)
    if max(eps_list) / min(eps_list) < 10.0 - 1e-9:
        raise ValidationError("eps grid should span at least one decade")
    tms, achieved = [], []
    for eps in eps_list:
        config = runner.configure(eps)
        curves = []
        for k, seed in enumerate(seeds):
            trace = runner.run(config.replace(seed=seed))
            curves.append(runner.metric_curve(trace))
        avg = np.mean(curves, axis=0)
        below = np.nonzero(avg <= eps)[0]
        below = below[below >= 1]
        if len(below):
            t_cross = int(below[0])
            tms.append(t_cross * config.batch_size)
            achieved.append(True)
        else:
            tms.append(config.iterations * config.batch_size)
            achieved.append(False)
    fit = _loglog_fit(1.0 / np.asarray(eps_list), np.asarray(tms, dtype=float))
    return SweepResult(eps=list(eps_list), tm=tms, achieved=achieved, fit=fit)
