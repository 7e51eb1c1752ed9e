"""Shared run configuration and per-iteration trace records."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ttsa.errors import ValidationError


@dataclass(frozen=True)
class TwoTimescaleConfig:
    """Constant stepsizes, batch size and iteration budget for one run.

    alpha drives the slow (main) iterate, beta the fast (auxiliary)
    tracker; two-timescale ordering requires alpha <= beta.
    """

    alpha: float
    beta: float
    batch_size: int
    iterations: int
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValidationError("stepsizes must be positive")
        if self.alpha > self.beta + 1e-15:
            raise ValidationError("two-timescale ordering requires alpha <= beta")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be a positive integer")
        if self.iterations < 0:
            raise ValidationError("iterations must be nonnegative")

    def replace(self, **kw) -> "TwoTimescaleConfig":
        vals = dict(
            alpha=self.alpha,
            beta=self.beta,
            batch_size=self.batch_size,
            iterations=self.iterations,
            seed=self.seed,
        )
        vals.update(kw)
        return TwoTimescaleConfig(**vals)


@dataclass
class RunTrace:
    """Per-iteration metrics of one run; row t describes iterate t.

    Row 0 is the initial point and samples[t] == t * batch_size.
    Metrics that do not apply to an algorithm (theta_err_sq outside the
    linear evaluation setting) stay None and serialize as empty fields.
    """

    algo: str
    seed: int
    batch_size: int
    t: np.ndarray
    samples: np.ndarray
    tracking_err_sq: np.ndarray
    objective: np.ndarray
    grad_norm_sq: np.ndarray
    theta_err_sq: np.ndarray | None = None
    theta_final: np.ndarray | None = None
    w_final: np.ndarray | None = None
    thetas: np.ndarray | None = None
    output_index: int | None = None
    assumption_violations: list = field(default_factory=list)

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ValidationError("trace records must be strictly ordered in t")
        if np.any(self.samples != self.t * self.batch_size):
            raise ValidationError("samples consumed must equal t * batch_size")

    @property
    def iterations(self) -> int:
        return int(self.t[-1])

    def delta(self) -> np.ndarray:
        """Combined error theta_err_sq + tracking_err_sq (linear runs)."""
        if self.theta_err_sq is None:
            raise ValidationError("delta needs theta_err_sq (linear traces only)")
        return self.theta_err_sq + self.tracking_err_sq

    def output_theta(self) -> np.ndarray:
        if self.thetas is None or self.output_index is None:
            raise ValidationError("trace carries no stored iterates")
        return self.thetas[self.output_index]
