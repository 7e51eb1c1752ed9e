"""Experiment orchestration: config resolution, runs, sweeps, probes,
and deterministic CSV/JSON persistence.

Artifacts per experiment: one trace CSV per seed (run_{seed}.csv), a
summary JSON with final metrics, bound evaluations and the constants
ledger, and a manifest holding the fully resolved config so the exact
experiment can be replayed byte-for-byte.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

import ttsa
from ttsa.analysis import (
    SweepResult,
    batch_variance_probe,
    complexity_sweep,
)
from ttsa.config import RunTrace, TwoTimescaleConfig
from ttsa.errors import ConfigError, ValidationError
from ttsa.greedy_gq import (
    StateActionFeatureMap,
    build_greedy_gq_exact,
    compute_C1,
    gq_w_of_theta,
    run_greedy_gq,
    theorem3_bound,
    theorem3_config,
)
from ttsa.linear_tdc import (
    LinearFeatureMap,
    build_linear_exact,
    compute_A1,
    practical_linear_config,
    run_linear_tdc,
    theorem1_bound,
    theorem1_config,
    w_of_theta,
)
from ttsa.linear_tdc import update_noise_second_moment as linear_noise_moment
from ttsa.nonlinear_tdc import update_noise_second_moment as nonlinear_noise_moment
from ttsa.greedy_gq import update_noise_second_moment as gq_noise_moment
from ttsa.mdp import (
    MdpModel,
    PolicyTable,
    fit_geometric_mixing,
    induced_chain,
    load_mdp,
    stationary_distribution,
    uniform_policy,
)
from ttsa.nonlinear_tdc import (
    build_nonlinear_exact,
    estimate_model_constants,
    ledger_from_report,
    make_model_from_spec,
    run_nonlinear_tdc,
    theorem2_bound,
    theorem2_config,
    w_of_theta_nl,
)
from ttsa.rng import make_rng, split

CSV_HEADER = [
    "run_id",
    "algo",
    "seed",
    "t",
    "samples",
    "theta_err_sq",
    "tracking_err_sq",
    "objective",
    "grad_norm_sq",
]

ALGORITHMS = ("linear-tdc", "nonlinear-tdc", "greedy-gq")


def fmt(x) -> str:
    """17-significant-digit float formatting (round-trip safe)."""
    if x is None:
        return ""
    return format(float(x), ".17g")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def dump_json(doc, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


@dataclass
class ExperimentConfig:
    """Fully resolved description of one experiment."""

    algorithm: str
    mdp_spec: dict | str
    behavior_policy: dict = field(default_factory=lambda: {"kind": "uniform"})
    target_policy: dict | None = None
    features: dict | None = None
    model: dict | None = None
    tau: float | None = None
    stepsizes: dict | str = "auto"
    target_eps: float | None = None
    schedule: str = "practical"
    seeds: list = field(default_factory=lambda: [0])
    out_dir: str = "out"
    mixing_horizon: int = 60
    sampled_next: bool = False
    rho_max: float | None = None  # declared Assumption-7 ratio bound (greedy-gq)

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}")
        if self.stepsizes == "auto" and self.target_eps is None:
            raise ConfigError('"auto" stepsizes require target_eps')
        if isinstance(self.stepsizes, dict):
            missing = {"alpha", "beta", "batch_size", "iterations"} - set(self.stepsizes)
            if missing:
                raise ConfigError(f"stepsizes block is missing {sorted(missing)}")
        if self.algorithm == "linear-tdc" and self.features is None:
            raise ConfigError("linear-tdc needs a features block")
        if self.algorithm == "nonlinear-tdc" and self.model is None:
            raise ConfigError("nonlinear-tdc needs a model block")
        if self.algorithm == "greedy-gq":
            if self.features is None:
                raise ConfigError("greedy-gq needs a features block")
            if self.tau is None:
                raise ConfigError("greedy-gq needs tau")
        if not self.seeds:
            raise ConfigError("need at least one seed")

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "mdp": self.mdp_spec,
            "behavior_policy": self.behavior_policy,
            "target_policy": self.target_policy,
            "features": self.features,
            "model": self.model,
            "tau": self.tau,
            "stepsizes": self.stepsizes,
            "target_eps": self.target_eps,
            "schedule": self.schedule,
            "seeds": list(self.seeds),
            "out_dir": self.out_dir,
            "mixing_horizon": self.mixing_horizon,
            "sampled_next": self.sampled_next,
            "rho_max": self.rho_max,
        }

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        if "config" in doc and "algorithm" not in doc:
            doc = doc["config"]  # manifest round-trip
        known = {
            "algorithm",
            "mdp",
            "behavior_policy",
            "target_policy",
            "features",
            "model",
            "tau",
            "stepsizes",
            "target_eps",
            "schedule",
            "seeds",
            "out_dir",
            "mixing_horizon",
            "sampled_next",
            "rho_max",
        }
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "algorithm" not in doc or "mdp" not in doc:
            raise ConfigError("config requires at least algorithm and mdp")
        kwargs = dict(doc)
        kwargs["mdp_spec"] = kwargs.pop("mdp")
        cfg = ExperimentConfig(**{k: v for k, v in kwargs.items() if v is not None or k in ("target_policy",)})
        cfg.validate()
        return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


# --- resolution helpers -------------------------------------------------------


def resolve_policy(spec: dict | None, mdp: MdpModel) -> PolicyTable:
    if spec is None or spec.get("kind") == "uniform":
        return uniform_policy(mdp)
    kind = spec.get("kind")
    if kind == "table":
        return PolicyTable(np.asarray(spec["probs"], dtype=float))
    if kind == "tilted":
        # uniform policy tilted toward action 0 by the given weight
        w = float(spec.get("weight", 0.6))
        probs = np.full((mdp.n_states, mdp.n_actions), (1.0 - w) / max(mdp.n_actions - 1, 1))
        probs[:, 0] = w
        return PolicyTable(probs)
    raise ConfigError(f"unknown policy kind: {kind!r}")


def resolve_state_features(spec: dict, mdp: MdpModel) -> LinearFeatureMap:
    kind = spec.get("kind")
    if kind == "random":
        return LinearFeatureMap.random(mdp.n_states, int(spec["d"]), int(spec.get("seed", 0)))
    if kind == "tabular":
        return LinearFeatureMap.tabular(mdp.n_states, float(spec.get("scale", 1.0)))
    if kind == "table":
        return LinearFeatureMap(np.asarray(spec["phi"], dtype=float))
    raise ConfigError(f"unknown feature kind: {kind!r}")


def resolve_pair_features(spec: dict, mdp: MdpModel) -> StateActionFeatureMap:
    kind = spec.get("kind")
    if kind == "random":
        return StateActionFeatureMap.random(
            mdp.n_states, mdp.n_actions, int(spec["d"]), int(spec.get("seed", 0))
        )
    if kind == "tabular":
        return StateActionFeatureMap.tabular(
            mdp.n_states, mdp.n_actions, float(spec.get("scale", 1.0))
        )
    if kind == "table":
        return StateActionFeatureMap(np.asarray(spec["phi"], dtype=float))
    raise ConfigError(f"unknown feature kind: {kind!r}")


def behavior_mixing(mdp: MdpModel, behavior: PolicyTable, horizon: int):
    chain = induced_chain(mdp, behavior)
    mu = stationary_distribution(chain)
    return fit_geometric_mixing(chain, mu, horizon), chain, mu


# --- single runs ----------------------------------------------------------------


def _resolve_run_config(cfg: ExperimentConfig, context: dict) -> TwoTimescaleConfig:
    if isinstance(cfg.stepsizes, dict):
        s = cfg.stepsizes
        return TwoTimescaleConfig(
            alpha=float(s["alpha"]),
            beta=float(s["beta"]),
            batch_size=int(s["batch_size"]),
            iterations=int(s["iterations"]),
        )
    algo = cfg.algorithm
    mixing = context["mixing"]
    if algo == "linear-tdc":
        if cfg.schedule == "literal":
            return theorem1_config(context["exact"], mixing, cfg.target_eps).config
        return practical_linear_config(
            context["exact"], mixing, cfg.target_eps,
            noise_second_moment=context["noise_moment"],
        ).config
    if algo == "nonlinear-tdc":
        if cfg.schedule == "literal":
            report = theorem2_config(
                context["ledger"], context["model"], mixing, cfg.target_eps,
                J0=context["J0"],
            )
            return report.config
        return practical_nonlinear_config(context, cfg.target_eps)
    if cfg.schedule == "literal":
        report = theorem3_config(context["exact"], mixing, cfg.target_eps, J0=context["J0"])
        return report.config
    return practical_gq_config(context, cfg.target_eps)


def practical_nonlinear_config(context: dict, eps: float) -> TwoTimescaleConfig:
    """Runnable nonconvex schedule: M and T both scale as 1/eps."""
    model = context["model"]
    beta = 0.8 / model.C_phi**2
    alpha = 0.5 * beta
    var_coeff = 4.0 * alpha * context["noise_moment"] * context["mixing"].factor
    m = int(np.ceil(max(var_coeff / eps, 16)))
    t = int(np.ceil(max(16.0 * max(context["J0"], 0.05) / (alpha * eps), 25)))
    return TwoTimescaleConfig(alpha=alpha, beta=beta, batch_size=m, iterations=t)


def practical_gq_config(context: dict, eps: float) -> TwoTimescaleConfig:
    exact = context["exact"]
    sig_max = float(np.linalg.eigvalsh(exact.Sigma)[-1])
    beta = 0.8 / sig_max
    alpha = 0.5 * beta
    var_coeff = 4.0 * alpha * context["noise_moment"] * context["mixing"].factor
    m = int(np.ceil(max(var_coeff / eps, 16)))
    t = int(np.ceil(max(16.0 * max(context["J0"], 0.05) / (alpha * eps), 25)))
    return TwoTimescaleConfig(alpha=alpha, beta=beta, batch_size=m, iterations=t)


def build_context(cfg: ExperimentConfig) -> dict:
    """Resolve MDP, policies, features/model, exact oracles and mixing."""
    mdp = load_mdp(cfg.mdp_spec)
    behavior = resolve_policy(cfg.behavior_policy, mdp)
    ctx: dict = {"mdp": mdp, "behavior": behavior}
    algo = cfg.algorithm
    if algo == "linear-tdc":
        target = resolve_policy(cfg.target_policy, mdp)
        features = resolve_state_features(cfg.features, mdp)
        exact = build_linear_exact(mdp, behavior, target, features)
        mixing, _, _ = behavior_mixing(mdp, behavior, cfg.mixing_horizon)
        ctx.update(target=target, features=features, exact=exact, mixing=mixing)
        ctx["J0"] = float(exact.b @ exact.Sigma_inv @ exact.b)
        ctx["noise_moment"] = linear_noise_moment(mdp, behavior, target, exact)
        ctx["constants"] = {
            "lambda1": exact.lambda1,
            "lambda2": exact.lambda2,
            "rho_max": exact.rho_max,
            "R_theta": exact.R_theta,
            "r_max": exact.r_max,
        }
    elif algo == "nonlinear-tdc":
        # on-policy sampling: the behavior policy is the evaluated policy
        model = make_model_from_spec(cfg.model, mdp, behavior)
        exact = build_nonlinear_exact(mdp, behavior, model)
        mixing, _, _ = behavior_mixing(mdp, behavior, cfg.mixing_horizon)
        rng = make_rng(1)
        grid = rng.standard_normal((12, model.d)) * 0.5
        report = estimate_model_constants(model, mdp, behavior, grid, exact=exact)
        ledger = ledger_from_report(report, model, exact)
        from ttsa.nonlinear_tdc import nonlinear_J

        ctx.update(
            model=model, exact=exact, mixing=mixing, ledger=ledger,
            constants_report=report, J0=float(nonlinear_J(exact, np.zeros(model.d))),
        )
        ctx["noise_moment"] = nonlinear_noise_moment(exact)
        ctx["constants"] = {
            "lambda_v": model.lambda_v,
            "C_phi": model.C_phi,
            "C_v": model.C_v,
            "D_v": model.D_v,
            "L_J": ledger.L_J,
            "L_e": ledger.L_e,
            "L_w": ledger.L_w,
            "C_g": ledger.C_g,
            "C_f": ledger.C_f,
            "R_w": ledger.R_w,
        }
    else:
        features = resolve_pair_features(cfg.features, mdp)
        exact = build_greedy_gq_exact(mdp, behavior, features, float(cfg.tau))
        if cfg.rho_max is not None:
            # the caller asserts a tighter ratio bound; runs verify it
            from dataclasses import replace as _dc_replace

            exact = _dc_replace(exact, rho_max=float(cfg.rho_max))
        mixing, _, _ = behavior_mixing(mdp, behavior, cfg.mixing_horizon)
        from ttsa.greedy_gq import gq_objective

        ctx.update(
            features=features, exact=exact, mixing=mixing,
            J0=float(gq_objective(exact, np.zeros(features.d))),
        )
        ctx["noise_moment"] = gq_noise_moment(exact)
        ctx["constants"] = {
            "lambda1": exact.lambda1,
            "lambda2": exact.lambda2,
            "rho_max": exact.rho_max,
            "R_theta": exact.R_theta,
            "L_J": exact.L_J,
        }
    return ctx


def run_one(cfg: ExperimentConfig, context: dict, run_config: TwoTimescaleConfig, seed: int) -> RunTrace:
    rc = run_config.replace(seed=seed)
    algo = cfg.algorithm
    if algo == "linear-tdc":
        return run_linear_tdc(
            context["mdp"], context["behavior"], context["target"],
            context["features"], rc, exact=context["exact"],
        )
    if algo == "nonlinear-tdc":
        return run_nonlinear_tdc(
            context["mdp"], context["behavior"], context["model"], rc,
            exact=context["exact"],
        )
    return run_greedy_gq(
        context["mdp"], context["behavior"], context["features"], float(cfg.tau),
        rc, exact=context["exact"], sampled_next=cfg.sampled_next,
    )


def write_trace_csv(trace: RunTrace, path: Path) -> None:
    run_id = f"{trace.algo}_{trace.seed}"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for i in range(len(trace.t)):
            theta_err = "" if trace.theta_err_sq is None else fmt(trace.theta_err_sq[i])
            writer.writerow(
                [
                    run_id,
                    trace.algo,
                    trace.seed,
                    int(trace.t[i]),
                    int(trace.samples[i]),
                    theta_err,
                    fmt(trace.tracking_err_sq[i]),
                    fmt(trace.objective[i]),
                    fmt(trace.grad_norm_sq[i]),
                ]
            )


_WORKER_STATE: dict = {}


def _worker_init(cfg_doc: dict):
    cfg = ExperimentConfig.from_dict(cfg_doc)
    _WORKER_STATE["cfg"] = cfg
    _WORKER_STATE["context"] = build_context(cfg)


def _worker_run(args):
    run_doc, seed, out_dir = args
    cfg = _WORKER_STATE["cfg"]
    context = _WORKER_STATE["context"]
    run_config = TwoTimescaleConfig(**run_doc)
    trace = run_one(cfg, context, run_config, seed)
    write_trace_csv(trace, Path(out_dir) / f"run_{seed}.csv")
    return seed, _trace_summary(trace)


def _trace_summary(trace: RunTrace) -> dict:
    out = {
        "final_tracking_err_sq": float(trace.tracking_err_sq[-1]),
        "final_objective": float(trace.objective[-1]),
        "final_grad_norm_sq": float(trace.grad_norm_sq[-1]),
        "assumption_violations": list(trace.assumption_violations),
    }
    if trace.theta_err_sq is not None:
        out["final_theta_err_sq"] = float(trace.theta_err_sq[-1])
    if trace.output_index is not None:
        out["output_index"] = int(trace.output_index)
        out["uniform_output_grad_norm_sq"] = float(
            trace.grad_norm_sq[1:].mean() if trace.iterations >= 1 else trace.grad_norm_sq[0]
        )
    return out


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> dict:
    """Execute all seeds, write artifacts, return the summary document."""
    cfg.validate()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    context = build_context(cfg)
    run_config = _resolve_run_config(cfg, context)

    run_doc = {
        "alpha": run_config.alpha,
        "beta": run_config.beta,
        "batch_size": run_config.batch_size,
        "iterations": run_config.iterations,
    }
    seeds = list(cfg.seeds)
    results: dict[int, dict] = {}
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_worker_init, initargs=(cfg.to_dict(),)
        ) as pool:
            for seed, summary in pool.map(
                _worker_run, [(run_doc, s, str(out_dir)) for s in seeds]
            ):
                results[seed] = summary
    else:
        for seed in seeds:
            trace = run_one(cfg, context, run_config, seed)
            write_trace_csv(trace, out_dir / f"run_{seed}.csv")
            results[seed] = _trace_summary(trace)

    summary = assemble_summary(cfg, context, run_config, results)
    dump_json(summary, out_dir / "summary.json")
    manifest = {
        "library": "ttsa",
        "version": ttsa.__version__,
        "config": cfg.to_dict(),
        "resolved_run_config": run_doc,
    }
    dump_json(manifest, out_dir / "manifest.json")
    return summary


def assemble_summary(
    cfg: ExperimentConfig,
    context: dict,
    run_config: TwoTimescaleConfig,
    results: dict[int, dict],
) -> dict:
    seeds = sorted(results)
    per_seed = {str(s): results[s] for s in seeds}
    mean = {}
    for key in next(iter(results.values())):
        if key in ("assumption_violations", "output_index"):
            continue
        mean[key] = float(np.mean([results[s][key] for s in seeds]))
    violations = [v for s in seeds for v in results[s]["assumption_violations"]]

    algo = cfg.algorithm
    mixing = context["mixing"]
    bound: dict = {}
    if algo == "linear-tdc":
        exact = context["exact"]
        theta0 = np.zeros(exact.d)
        delta0 = float(
            np.sum(exact.theta_star**2) + np.sum(w_of_theta(exact, theta0) ** 2)
        )
        bound["A1"] = compute_A1(exact, mixing, run_config.alpha, run_config.beta)
        # per-iteration ingredients so the bound curve
        # (1 - rate)^t delta0 + A1/M can be reconstructed downstream
        bound["contraction_rate"] = (
            min(exact.lambda1 * run_config.alpha, exact.lambda2 * run_config.beta) / 8.0
        )
        bound["delta0"] = delta0
        bound["rhs_final_theta_err"] = theorem1_bound(exact, mixing, run_config, delta0)
        bound["holds"] = mean["final_theta_err_sq"] <= bound["rhs_final_theta_err"]
    elif algo == "nonlinear-tdc":
        exact, model, ledger = context["exact"], context["model"], context["ledger"]
        w_gap0 = float(np.sum(w_of_theta_nl(exact, np.zeros(model.d)) ** 2))
        empirical = mean.get("uniform_output_grad_norm_sq")
        rhs = theorem2_bound(
            ledger, model.lambda_v, mixing, run_config,
            J0=context["J0"], JT=mean["final_objective"], w_gap0_sq=w_gap0,
        )
        bound["rhs_uniform_output_grad_sq"] = rhs
        bound["holds"] = empirical <= rhs
    else:
        exact = context["exact"]
        w_gap0 = float(np.sum(gq_w_of_theta(exact, np.zeros(exact.d)) ** 2))
        empirical = mean.get("uniform_output_grad_norm_sq")
        rhs = theorem3_bound(
            exact, mixing, run_config,
            J0=context["J0"], JT=mean["final_objective"], w_gap0_sq=w_gap0,
        )
        bound["C1"] = compute_C1(exact, mixing, run_config.alpha, run_config.beta)
        bound["rhs_uniform_output_grad_sq"] = rhs
        bound["holds"] = empirical <= rhs

    return {
        "algorithm": algo,
        "run_config": {
            "alpha": run_config.alpha,
            "beta": run_config.beta,
            "batch_size": run_config.batch_size,
            "iterations": run_config.iterations,
        },
        "seeds": seeds,
        "per_seed": per_seed,
        "seed_mean": mean,
        "mixing": {
            "kappa": mixing.kappa,
            "rho": mixing.rho,
            "factor": mixing.factor,
            "max_residual": mixing.max_residual,
        },
        "constants": context["constants"],
        "bound": bound,
        "assumption_violations": violations,
    }


# --- sweep runners ---------------------------------------------------------------


class LinearSweepRunner:
    """Samples-to-accuracy runner for the evaluation algorithm."""

    def __init__(self, mdp, behavior, target, features, mixing=None,
                 alpha=None, beta=None, var_coeff=None, window_coeff=4.0):
        self.mdp, self.behavior, self.target, self.features = mdp, behavior, target, features
        self.exact = build_linear_exact(mdp, behavior, target, features)
        if mixing is None:
            mixing, _, _ = behavior_mixing(mdp, behavior, 60)
        self.mixing = mixing
        noise = linear_noise_moment(mdp, behavior, target, self.exact)
        base = practical_linear_config(self.exact, mixing, 1e-2, noise_second_moment=noise)
        self.alpha = base.config.alpha if alpha is None else alpha
        self.beta = base.config.beta if beta is None else beta
        self.var_coeff = (
            base.variance_constant if var_coeff is None else var_coeff
        )
        self.window_coeff = window_coeff
        self.rate = min(self.exact.lambda1 * self.alpha, self.exact.lambda2 * self.beta)

    def configure(self, eps: float) -> TwoTimescaleConfig:
        m = int(np.ceil(max(2.0 * self.var_coeff / eps, 8)))
        delta0 = float(
            np.sum(self.exact.theta_star**2)
            + np.sum(w_of_theta(self.exact, np.zeros(self.exact.d)) ** 2)
        )
        t = int(np.ceil(self.window_coeff * 8.0 / self.rate * np.log(max(2.0 * delta0 / eps, 2.0))))
        return TwoTimescaleConfig(alpha=self.alpha, beta=self.beta, batch_size=m, iterations=t)

    def run(self, config: TwoTimescaleConfig) -> RunTrace:
        return run_linear_tdc(
            self.mdp, self.behavior, self.target, self.features, config, exact=self.exact
        )

    def metric_curve(self, trace: RunTrace) -> np.ndarray:
        return trace.theta_err_sq


class _UniformOutputRunner:
    """Shared metric: running mean of the squared gradient norm, which is
    the expectation over the uniformly drawn output index."""

    def metric_curve(self, trace: RunTrace) -> np.ndarray:
        g = trace.grad_norm_sq
        curve = np.empty_like(g)
        curve[0] = g[0]
        curve[1:] = np.cumsum(g[1:]) / np.arange(1, len(g))
        return curve


class NonlinearSweepRunner(_UniformOutputRunner):
    def __init__(self, mdp, policy, model, mixing=None,
                 alpha=None, beta=None, var_coeff=None, transient_coeff=None):
        self.mdp, self.policy, self.model = mdp, policy, model
        self.exact = build_nonlinear_exact(mdp, policy, model)
        if mixing is None:
            mixing, _, _ = behavior_mixing(mdp, policy, 60)
        self.mixing = mixing
        self.beta = 0.8 / model.C_phi**2 if beta is None else beta
        self.alpha = 0.5 * self.beta if alpha is None else alpha
        from ttsa.nonlinear_tdc import nonlinear_J

        j0 = nonlinear_J(self.exact, np.zeros(model.d))
        self.var_coeff = (
            2.0 * self.alpha * nonlinear_noise_moment(self.exact) * mixing.factor
            if var_coeff is None
            else var_coeff
        )
        self.transient_coeff = (
            16.0 * max(j0, 0.05) / self.alpha if transient_coeff is None else transient_coeff
        )

    def configure(self, eps: float) -> TwoTimescaleConfig:
        m = int(np.ceil(max(2.0 * self.var_coeff / eps, 8)))
        t = int(np.ceil(max(self.transient_coeff / eps, 25)))
        return TwoTimescaleConfig(alpha=self.alpha, beta=self.beta, batch_size=m, iterations=t)

    def run(self, config: TwoTimescaleConfig) -> RunTrace:
        return run_nonlinear_tdc(self.mdp, self.policy, self.model, config, exact=self.exact)


class GreedyGqSweepRunner(_UniformOutputRunner):
    def __init__(self, mdp, behavior, features, tau, mixing=None,
                 alpha=None, beta=None, var_coeff=None, transient_coeff=None):
        self.mdp, self.behavior, self.features, self.tau = mdp, behavior, features, tau
        self.exact = build_greedy_gq_exact(mdp, behavior, features, tau)
        if mixing is None:
            mixing, _, _ = behavior_mixing(mdp, behavior, 60)
        self.mixing = mixing
        sig_max = float(np.linalg.eigvalsh(self.exact.Sigma)[-1])
        self.beta = 0.8 / sig_max if beta is None else beta
        self.alpha = 0.5 * self.beta if alpha is None else alpha
        from ttsa.greedy_gq import gq_objective

        j0 = gq_objective(self.exact, np.zeros(features.d))
        self.var_coeff = (
            2.0 * self.alpha * gq_noise_moment(self.exact) * mixing.factor
            if var_coeff is None
            else var_coeff
        )
        self.transient_coeff = (
            16.0 * max(j0, 0.05) / self.alpha if transient_coeff is None else transient_coeff
        )

    def configure(self, eps: float) -> TwoTimescaleConfig:
        m = int(np.ceil(max(2.0 * self.var_coeff / eps, 8)))
        t = int(np.ceil(max(self.transient_coeff / eps, 25)))
        return TwoTimescaleConfig(alpha=self.alpha, beta=self.beta, batch_size=m, iterations=t)

    def run(self, config: TwoTimescaleConfig) -> RunTrace:
        return run_greedy_gq(
            self.mdp, self.behavior, self.features, self.tau, config, exact=self.exact
        )


def build_sweep_runner(cfg: ExperimentConfig):
    context = build_context(cfg)
    if cfg.algorithm == "linear-tdc":
        return LinearSweepRunner(
            context["mdp"], context["behavior"], context["target"],
            context["features"], mixing=context["mixing"],
        )
    if cfg.algorithm == "nonlinear-tdc":
        return NonlinearSweepRunner(
            context["mdp"], context["behavior"], context["model"],
            mixing=context["mixing"],
        )
    return GreedyGqSweepRunner(
        context["mdp"], context["behavior"], context["features"], float(cfg.tau),
        mixing=context["mixing"],
    )


def sweep_experiment(cfg: ExperimentConfig, eps_list, seeds) -> dict:
    runner = build_sweep_runner(cfg)
    result = complexity_sweep(runner, eps_list, seeds)
    return {
        "algorithm": cfg.algorithm,
        "eps": result.eps,
        "tm": result.tm,
        "achieved": result.achieved,
        "slope": result.fit.slope,
        "intercept": result.fit.intercept,
        "r_squared": result.fit.r_squared,
    }
