#!/usr/bin/env python3
"""Geometric-mixing envelopes and variance-law probes for the builtin MDPs.

    python scripts/mixing_report.py
"""

import json

import numpy as np

from ttsa.analysis import _loglog_fit, batch_variance_probe
from ttsa.harness import behavior_mixing
from ttsa.mdp import load_mdp, uniform_policy


def main():
    for name, params in (("twostate", {}), ("baird7", {}),
                         ("random-garnet", {"states": 10, "actions": 2,
                                            "branching": 3, "seed": 0})):
        mdp = load_mdp(name, **params)
        mixing, chain, mu = behavior_mixing(mdp, uniform_policy(mdp), 60)
        probe = batch_variance_probe(chain, mu, np.eye(mdp.n_states),
                                     [10, 30, 100, 300, 1000], reps=400,
                                     seed=0, mixing=mixing)
        fit = _loglog_fit(probe.batch_sizes, probe.empirical)
        print(json.dumps({
            "mdp": name,
            "kappa": mixing.kappa,
            "rho": mixing.rho,
            "variance_law_slope": fit.slope,
            "bound_satisfied": probe.satisfied(),
        }, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
