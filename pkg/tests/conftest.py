"""Shared desk-scale instances.

The tuned instances are fixed by seed so every run of the suite sees
identical streams; session scope keeps the exact-oracle builds cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import settings

from ttsa.greedy_gq import StateActionFeatureMap, build_greedy_gq_exact
from ttsa.harness import behavior_mixing
from ttsa.linear_tdc import LinearFeatureMap, build_linear_exact
from ttsa.mdp import (
    MdpModel,
    PolicyTable,
    induced_chain,
    make_garnet,
    make_twostate,
    stationary_distribution,
    uniform_policy,
)
from ttsa.nonlinear_tdc import (
    build_nonlinear_exact,
    estimate_model_constants,
    ledger_from_report,
    make_model_from_spec,
)
from ttsa.rng import make_rng

settings.register_profile("suite", max_examples=25, deadline=None)
settings.load_profile("suite")


@dataclass
class ChainSetup:
    mdp: MdpModel
    policy: PolicyTable
    chain: np.ndarray
    mu: np.ndarray
    mixing: object


@pytest.fixture(scope="session")
def twostate_setup() -> ChainSetup:
    mdp = make_twostate()
    policy = uniform_policy(mdp)
    mixing, chain, mu = behavior_mixing(mdp, policy, 40)
    return ChainSetup(mdp, policy, chain, mu, mixing)


@dataclass
class LinearSetup:
    mdp: MdpModel
    behavior: PolicyTable
    target: PolicyTable
    features: LinearFeatureMap
    exact: object
    mixing: object


@pytest.fixture(scope="session")
def linear_setup() -> LinearSetup:
    """Off-policy evaluation instance: 10 states, 2 actions, d = 4,
    importance ratios bounded by 1.4."""
    mdp = make_garnet(10, 2, 3, seed=0, gamma=0.5, reward_scale=0.5)
    features = LinearFeatureMap.random(10, 4, seed=1)
    behavior = uniform_policy(mdp)
    target = PolicyTable(np.tile([0.7, 0.3], (10, 1)))
    exact = build_linear_exact(mdp, behavior, target, features)
    mixing, _, _ = behavior_mixing(mdp, behavior, 60)
    return LinearSetup(mdp, behavior, target, features, exact, mixing)


@dataclass
class NonlinearSetup:
    mdp: MdpModel
    policy: PolicyTable
    model: object
    exact: object
    mixing: object
    report: object
    ledger: object


def _build_nonlinear(reward_scale: float) -> NonlinearSetup:
    mdp = make_garnet(8, 2, 3, seed=7, gamma=0.85, reward_scale=reward_scale)
    policy = uniform_policy(mdp)
    model = make_model_from_spec(
        {"kind": "tanh-linear", "d": 4, "c": 0.25, "kappa_lin": 1.0, "base_seed": 1},
        mdp,
        policy,
    )
    exact = build_nonlinear_exact(mdp, policy, model)
    mixing, _, _ = behavior_mixing(mdp, policy, 60)
    grid = make_rng(1).standard_normal((10, 4)) * 0.5
    report = estimate_model_constants(model, mdp, policy, grid, exact=exact)
    ledger = ledger_from_report(report, model, exact)
    return NonlinearSetup(mdp, policy, model, exact, mixing, report, ledger)


@pytest.fixture(scope="session")
def nl_setup() -> NonlinearSetup:
    return _build_nonlinear(1.0)


@pytest.fixture(scope="session")
def nl_sweep_setup() -> NonlinearSetup:
    return _build_nonlinear(2.0)


@dataclass
class GqSetup:
    mdp: MdpModel
    behavior: PolicyTable
    features: StateActionFeatureMap
    tau: float
    exact: object
    mixing: object


def _build_gq(reward_scale: float) -> GqSetup:
    mdp = make_garnet(6, 2, 3, seed=2, gamma=0.8, reward_scale=reward_scale)
    behavior = uniform_policy(mdp)
    features = StateActionFeatureMap.random(6, 2, 4, seed=3)
    exact = build_greedy_gq_exact(mdp, behavior, features, tau=1.0)
    mixing, _, _ = behavior_mixing(mdp, behavior, 60)
    return GqSetup(mdp, behavior, features, 1.0, exact, mixing)


@pytest.fixture(scope="session")
def gq_setup() -> GqSetup:
    return _build_gq(0.5)


@pytest.fixture(scope="session")
def gq_sweep_setup() -> GqSetup:
    return _build_gq(2.0)


def stationary_triples(mdp: MdpModel, behavior: PolicyTable, mu, n: int, seed: int):
    """n i.i.d. (s, a, s') draws from the stationary triple distribution;
    used by Monte-Carlo oracles that average stationary one-step samples."""
    rng = make_rng(seed)
    s = rng.choice(mdp.n_states, size=n, p=mu)
    cum_pol = np.cumsum(behavior.probs, axis=1)
    a = (cum_pol[s] < rng.random(n)[:, None]).sum(axis=1)
    cum_ker = np.cumsum(mdp.transition, axis=2)
    s2 = (cum_ker[s, a] < rng.random(n)[:, None]).sum(axis=1)
    return s, a, s2
