"""Finite MDPs, policies, stationary distributions, mixing envelopes,
and seeded Markovian trajectory generation.

Everything downstream (the three algorithms and their exact oracles)
consumes the objects defined here.  All types are immutable after
construction except :class:`TrajectoryStream`, which is single-owner
sequential.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ttsa.errors import ErgodicityError, MixingError, ValidationError
from ttsa.rng import make_rng

_ROW_SUM_TOL = 1e-12
_STATIONARY_TOL = 1e-12
# Matrix squaring reaches time horizon 2**_SQUARINGS; row agreement at that
# horizon is the ergodicity certificate (covers reducible and periodic chains,
# which plain residual checks miss because any start vector is already a fixed
# point of e.g. the identity chain).
_SQUARINGS = 60
_RHO_FLOOR = 1e-6


def _check_rows_stochastic(mat: np.ndarray, what: str) -> None:
    if np.any(mat < 0):
        raise ValidationError(f"{what} has negative entries")
    err = np.abs(mat.sum(axis=-1) - 1.0)
    if err.max() > _ROW_SUM_TOL:
        raise ValidationError(
            f"{what} rows must sum to 1 within {_ROW_SUM_TOL}; worst error {err.max():.3e}"
        )


@dataclass(frozen=True)
class MdpModel:
    """Finite MDP with transition tensor P[s][a][s'] and reward tensor r[s][a][s'].

    Serves as ground truth for every exact oracle: all expectations are
    finite sums over this model.
    """

    n_states: int
    n_actions: int
    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    r_max: float
    name: str = ""

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        R = np.asarray(self.reward, dtype=float)
        if self.n_states < 1 or self.n_actions < 1:
            raise ValidationError("n_states and n_actions must be positive")
        shape = (self.n_states, self.n_actions, self.n_states)
        if P.shape != shape or R.shape != shape:
            raise ValidationError(f"transition/reward must have shape {shape}")
        _check_rows_stochastic(P, "transition tensor")
        if not (0.0 < self.gamma < 1.0):
            raise ValidationError("gamma must lie strictly inside (0, 1)")
        if np.abs(R).max(initial=0.0) > self.r_max + 1e-15:
            raise ValidationError("|reward| exceeds declared r_max")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)

    @staticmethod
    def from_tensors(transition, reward, gamma, r_max=None, name="") -> "MdpModel":
        P = np.asarray(transition, dtype=float)
        R = np.asarray(reward, dtype=float)
        if r_max is None:
            r_max = float(np.abs(R).max(initial=0.0))
        return MdpModel(P.shape[0], P.shape[1], P, R, float(gamma), float(r_max), name)

    def expected_reward(self) -> np.ndarray:
        """r̄(s, a) = Σ_s' P(s'|s,a) r(s,a,s')."""
        return np.einsum("ijk,ijk->ij", self.transition, self.reward)

    def to_json_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "gamma": self.gamma,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
            "name": self.name,
        }


@dataclass(frozen=True)
class PolicyTable:
    """Tabular policy π[s][a]; rows are action distributions."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2:
            raise ValidationError("policy table must be 2-D (states x actions)")
        _check_rows_stochastic(probs, "policy table")
        object.__setattr__(self, "probs", probs)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]


def uniform_policy(mdp: MdpModel) -> PolicyTable:
    probs = np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions)
    return PolicyTable(probs)


def check_support(target: PolicyTable, behavior: PolicyTable) -> None:
    """Importance weights are finite only if π_b > 0 wherever π > 0."""
    from ttsa.errors import SupportError

    bad = (target.probs > 0) & (behavior.probs == 0)
    if np.any(bad):
        s, a = np.argwhere(bad)[0]
        raise SupportError(
            f"target puts mass on (s={s}, a={a}) where behavior has none"
        )


@dataclass(frozen=True)
class MixingEstimate:
    """Geometric-ergodicity envelope: sup_s d_TV(P^t(·|s), μ) ≤ κ ρ^t."""

    kappa: float
    rho: float
    max_residual: float

    def __post_init__(self):
        if not (self.kappa > 0):
            raise ValidationError("kappa must be positive")
        if not (0.0 < self.rho < 1.0):
            raise ValidationError("rho must lie in (0, 1)")

    @property
    def factor(self) -> float:
        """(1 + (κ − 1) ρ) / (1 − ρ), the batch-variance inflation factor."""
        return (1.0 + (self.kappa - 1.0) * self.rho) / (1.0 - self.rho)


def induced_chain(mdp: MdpModel, policy: PolicyTable) -> np.ndarray:
    """State chain p(s'|s) = Σ_a P(s'|s,a) π(a|s)."""
    if policy.probs.shape != (mdp.n_states, mdp.n_actions):
        raise ValidationError(
            f"policy shape {policy.probs.shape} does not match MDP "
            f"({mdp.n_states} states, {mdp.n_actions} actions)"
        )
    return np.einsum("sa,sap->sp", policy.probs, mdp.transition)


def stationary_distribution(chain: np.ndarray, tol: float = _STATIONARY_TOL) -> np.ndarray:
    """Unique stationary distribution of an ergodic chain.

    Raises :class:`ErgodicityError` when the chain is reducible or
    periodic (detected by the rows of P^t failing to agree at a horizon
    far beyond 1e6 steps).
    """
    P = np.asarray(chain, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError("chain must be a square matrix")
    _check_rows_stochastic(P, "chain")

    M = P.copy()
    for _ in range(_SQUARINGS):
        M = M @ M
        np.clip(M, 0.0, None, out=M)
        M /= M.sum(axis=1, keepdims=True)
        if np.abs(M - M[0]).max() < 1e-13:
            break
    if np.abs(M - M[0]).max() > 1e-9:
        raise ErgodicityError(
            "rows of P^t do not converge to a common distribution; "
            "chain is reducible or periodic"
        )
    mu = M.mean(axis=0)
    # Polish to the residual contract by averaging the invariance iteration.
    for _ in range(200):
        nxt = mu @ P
        if np.abs(nxt - mu).max() <= tol:
            mu = nxt
            break
        mu = nxt
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    if np.abs(mu @ P - mu).max() > tol * 10:
        raise ErgodicityError("stationary residual failed to reach tolerance")
    return mu


def tv_decay_curve(chain: np.ndarray, mu: np.ndarray, horizon: int) -> np.ndarray:
    """d[t, s] = d_TV(P^t(·|s), μ) for t = 0..horizon."""
    P = np.asarray(chain, dtype=float)
    n = P.shape[0]
    rows = np.eye(n)
    out = np.empty((horizon + 1, n))
    for t in range(horizon + 1):
        out[t] = 0.5 * np.abs(rows - mu).sum(axis=1)
        rows = rows @ P
    return out


def _second_eigenvalue_modulus(chain: np.ndarray) -> float:
    eig = np.sort(np.abs(np.linalg.eigvals(chain)))
    return float(eig[-2]) if len(eig) >= 2 else 0.0


def fit_geometric_mixing(
    chain: np.ndarray, mu: np.ndarray, horizon: int
) -> MixingEstimate:
    """Fit the smallest usable geometric envelope (κ, ρ) to the TV decay.

    ρ candidates are the floor 1e-6, the chain's second-largest
    eigenvalue modulus, and the grid 0.01..0.99; a candidate is feasible
    when the envelope with κ = max_{t,s} d_TV/ρ^t binds at t ≤ 1, so
    extrapolating κ ρ^t beyond the horizon stays trustworthy.  The
    smallest feasible candidate wins.
    """
    if horizon < 2:
        raise ValidationError("horizon must be at least 2")
    d = tv_decay_curve(chain, mu, horizon)
    sup = d.max(axis=1)  # sup over start states, per t
    sup[sup < 1e-14] = 0.0  # repeated matmul noise floor; numerically fully mixed
    if sup[1:].max(initial=0.0) >= sup[0] - 1e-15 and sup[0] > 0:
        raise MixingError("total-variation distance does not decay over the horizon")

    slem = max(_second_eigenvalue_modulus(chain), _RHO_FLOOR)
    candidates = sorted({_RHO_FLOOR, slem} | {round(0.01 * k, 2) for k in range(1, 100)})
    t_grid = np.arange(horizon + 1)
    log_sup = np.where(sup > 0, np.log(np.maximum(sup, 1e-300)), -np.inf)
    for rho in candidates:
        if not (0.0 < rho < 1.0):
            continue
        log_ratio = log_sup - t_grid * np.log(rho)
        log_kappa = log_ratio.max()
        head = log_ratio[:2].max()
        if not np.isfinite(log_kappa):
            # already fully mixed at every horizon step
            return MixingEstimate(_RHO_FLOOR, float(rho), 0.0)
        if log_kappa <= head + 1e-9:
            kappa = float(np.exp(log_kappa))
            with np.errstate(under="ignore"):
                envelope = kappa * rho ** t_grid.astype(float)
            max_residual = float(np.clip(sup - envelope, 0.0, None).max())
            if max_residual <= 1e-10:
                return MixingEstimate(kappa, float(rho), max_residual)
    raise MixingError("no geometric envelope binds within the candidate grid")


def value_function_exact(mdp: MdpModel, policy: PolicyTable) -> np.ndarray:
    """V^π = (I − γ P_π)^{-1} r_π, the Bellman fixed point."""
    P_pi = induced_chain(mdp, policy)
    r_bar = np.einsum("sa,sa->s", policy.probs, mdp.expected_reward())
    n = mdp.n_states
    return np.linalg.solve(np.eye(n) - mdp.gamma * P_pi, r_bar)


# --- trajectory generation ------------------------------------------------

try:  # hot loop; pure-python fallback below keeps results identical
    from numba import njit as _njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

if _HAVE_NUMBA:

    @_njit(cache=True)
    def _walk_sa(pol_cum, ker_cum, u_a, u_s, s0):
        n = u_a.shape[0]
        states = np.empty(n + 1, dtype=np.int64)
        actions = np.empty(n, dtype=np.int64)
        s = s0
        states[0] = s
        for i in range(n):
            row = pol_cum[s]
            a = 0
            while row[a] < u_a[i]:
                a += 1
            krow = ker_cum[s, a]
            sn = 0
            while krow[sn] < u_s[i]:
                sn += 1
            actions[i] = a
            states[i + 1] = sn
            s = sn
        return states, actions

else:

    def _walk_sa(pol_cum, ker_cum, u_a, u_s, s0):  # pragma: no cover
        n = u_a.shape[0]
        states = np.empty(n + 1, dtype=np.int64)
        actions = np.empty(n, dtype=np.int64)
        s = s0
        states[0] = s
        for i in range(n):
            a = int(np.searchsorted(pol_cum[s], u_a[i], side="left"))
            a = min(a, pol_cum.shape[1] - 1)
            sn = int(np.searchsorted(ker_cum[s, a], u_s[i], side="left"))
            sn = min(sn, ker_cum.shape[2] - 1)
            actions[i] = a
            states[i + 1] = sn
            s = sn
        return states, actions


@dataclass
class TrajectoryStream:
    """Single chained sample path under a behavior policy.

    Sample j is (s_j, a_j, r_j, s_{j+1}, a_{j+1}); consecutive samples
    share states (no i.i.d. restarts).  Identical seeds give identical
    streams.  ``next_batch`` consumes contiguous, non-overlapping
    windows, matching mini-batch indices i_t = t·M.
    """

    mdp: MdpModel
    behavior: PolicyTable
    seed: int
    init_dist: np.ndarray | None = None
    cursor: int = field(default=0, init=False)
    _BLOCK: int = field(default=65536, init=False, repr=False)

    def __post_init__(self):
        if self.behavior.probs.shape != (self.mdp.n_states, self.mdp.n_actions):
            raise ValidationError("behavior policy does not match the MDP")
        self._rng = make_rng(self.seed)
        self._pol_cum = np.cumsum(self.behavior.probs, axis=1)
        self._pol_cum[:, -1] = 1.0 + 1e-12
        self._ker_cum = np.cumsum(self.mdp.transition, axis=2)
        self._ker_cum[:, :, -1] = 1.0 + 1e-12
        if self.init_dist is None:
            s0 = int(self._rng.integers(self.mdp.n_states))
        else:
            p = np.asarray(self.init_dist, dtype=float)
            _check_rows_stochastic(p[None, :], "initial distribution")
            s0 = int(np.searchsorted(np.cumsum(p), self._rng.random(), side="right"))
            s0 = min(s0, self.mdp.n_states - 1)
        # states buffer always holds one state beyond the last emitted action
        self._states = np.array([s0], dtype=np.int64)
        self._actions = np.empty(0, dtype=np.int64)
        self._filled = 0  # actions generated so far

    def _extend(self, n_new: int) -> None:
        u_a = self._rng.random(n_new)
        u_s = self._rng.random(n_new)
        states, actions = _walk_sa(
            self._pol_cum, self._ker_cum, u_a, u_s, int(self._states[-1])
        )
        self._states = np.concatenate([self._states[:-1], states])
        self._actions = np.concatenate([self._actions, actions])
        self._filled += n_new

    def draw_index(self, low: int, high: int) -> int:
        """Uniform integer in [low, high) from this stream's generator.

        Used for the uniformly chosen output iterate, so the whole run
        is a function of one seed.
        """
        return int(self._rng.integers(low, high))

    def next_batch(self, m: int):
        """Next m chained samples: arrays (s, a, r, s', a')."""
        if m < 1:
            raise ValidationError("batch size must be at least 1")
        # one extra action needed so the last sample carries a_{j+1}
        need = self.cursor + m + 1 - self._filled
        if need > 0:
            self._extend(max(need, self._BLOCK))
        j = self.cursor
        s = self._states[j : j + m]
        a = self._actions[j : j + m]
        s2 = self._states[j + 1 : j + m + 1]
        a2 = self._actions[j + 1 : j + m + 1]
        r = self.mdp.reward[s, a, s2]
        self.cursor += m
        return s, a, r, s2, a2


def sample_trajectory(
    mdp: MdpModel,
    behavior: PolicyTable,
    seed: int,
    length: int,
    init_dist: np.ndarray | None = None,
) -> TrajectoryStream:
    """Stream of ``length`` (pre-validated) chained samples; lazily extended."""
    if length < 1:
        raise ValidationError("length must be at least 1")
    stream = TrajectoryStream(mdp, behavior, seed, init_dist)
    return stream


def simulate_chain_batch(
    chain: np.ndarray, starts: np.ndarray, length: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized batch of independent state chains; shape (reps, length).

    Column 0 is the start state itself, so each row is a window of
    ``length`` states.
    """
    P_cum = np.cumsum(chain, axis=1)
    P_cum[:, -1] = 1.0 + 1e-12
    reps = len(starts)
    out = np.empty((reps, length), dtype=np.int64)
    out[:, 0] = starts
    for t in range(1, length):
        u = rng.random(reps)
        rows = P_cum[out[:, t - 1]]
        out[:, t] = (rows < u[:, None]).sum(axis=1)
    return out


# --- builtin MDPs and the JSON file format --------------------------------


def make_twostate() -> MdpModel:
    """Two states; action 0 stays put, action 1 jumps uniformly.

    Under the uniform policy the induced chain flips with probability
    1/4, so the TV decay is exactly 0.5 · 0.5^t from either start.
    """
    P = np.zeros((2, 2, 2))
    P[0, 0, 0] = 1.0
    P[1, 0, 1] = 1.0
    P[:, 1, :] = 0.5
    R = np.zeros((2, 2, 2))
    R[:, :, 0] = 1.0
    R[:, :, 1] = -1.0
    return MdpModel.from_tensors(P, R, gamma=0.9, r_max=1.0, name="twostate")


def make_baird7() -> MdpModel:
    """Baird's 7-state star: action 0 (dashed) jumps uniformly to states
    0..5, action 1 (solid) jumps to state 6.  All rewards are zero."""
    n = 7
    P = np.zeros((n, 2, n))
    P[:, 0, :6] = 1.0 / 6.0
    P[:, 1, 6] = 1.0
    R = np.zeros((n, 2, n))
    return MdpModel.from_tensors(P, R, gamma=0.99, r_max=0.0, name="baird7")


def make_garnet(
    n_states: int = 10,
    n_actions: int = 2,
    branching: int = 3,
    seed: int = 0,
    gamma: float = 0.9,
    reward_scale: float = 1.0,
) -> MdpModel:
    """Random Garnet MDP: each (s, a) reaches ``branching`` states with
    probabilities from sorted uniform cut points; rewards ~ U(-scale, scale)
    on the (s, a, s') triples."""
    rng = make_rng(seed)
    P = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            nxt = rng.choice(n_states, size=branching, replace=False)
            cuts = np.sort(rng.random(branching - 1))
            probs = np.diff(np.concatenate([[0.0], cuts, [1.0]]))
            P[s, a, nxt] = probs
    R = reward_scale * (2.0 * rng.random((n_states, n_actions, n_states)) - 1.0)
    return MdpModel.from_tensors(
        P, R, gamma=gamma, r_max=reward_scale, name=f"garnet-{n_states}x{n_actions}"
    )


def load_mdp(spec: str | Path | dict, **params) -> MdpModel:
    """Load an MDP from a JSON file path or a builtin identifier.

    Builtins: "twostate", "baird7", and "random-garnet" (parameters
    states, actions, branching, seed, gamma, reward_scale).
    """
    if isinstance(spec, dict):
        name = spec.get("name")
        if name is not None and "transition" not in spec:
            merged = {k: v for k, v in spec.items() if k != "name"}
            merged.update(params)
            return load_mdp(name, **merged)
        return MdpModel.from_tensors(
            spec["transition"],
            spec["reward"],
            spec["gamma"],
            name=spec.get("name", ""),
        )
    if isinstance(spec, str):
        if spec == "twostate":
            return make_twostate()
        if spec == "baird7":
            return make_baird7()
        if spec == "random-garnet":
            keys = {"states": "n_states", "actions": "n_actions"}
            kwargs = {keys.get(k, k): v for k, v in params.items()}
            return make_garnet(**kwargs)
    path = Path(spec)
    if not path.exists():
        raise ValidationError(f"unknown MDP identifier or missing file: {spec}")
    with open(path) as fh:
        doc = json.load(fh)
    return load_mdp(doc)


def save_mdp(mdp: MdpModel, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(mdp.to_json_dict(), fh)
