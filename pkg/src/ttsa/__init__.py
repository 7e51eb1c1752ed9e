"""Two-timescale value-based RL algorithms on finite MDPs.

Mini-batch linear TDC, nonlinear TDC and Greedy-GQ with Markovian
sampling, together with exact closed-form oracles (fixed points,
objectives, gradients, eigen-gaps), geometric-mixing estimation, and
the worst-case schedule calculators and diagnostics that make the
algorithms' convergence guarantees empirically checkable at desk scale.
"""

from ttsa.errors import (
    AssumptionViolation,
    ConfigError,
    ErgodicityError,
    InsufficientSignalError,
    MixingError,
    ResourceCapError,
    SingularMatrixError,
    SupportError,
    ValidationError,
)
from ttsa.mdp import (
    MdpModel,
    MixingEstimate,
    PolicyTable,
    TrajectoryStream,
    fit_geometric_mixing,
    induced_chain,
    load_mdp,
    sample_trajectory,
    stationary_distribution,
    uniform_policy,
    value_function_exact,
)
from ttsa.config import RunTrace, TwoTimescaleConfig

__version__ = "0.1.0"
