"""Stackelberg pricing and task-offloading simulator for edge-cloud systems.

A library plus CLI implementing a multi-leader multi-follower pricing and
offloading game: a queueing-theoretic cost model, a proximal best-response
solver for the device (follower) equilibrium, finite-difference price ascent
for the providers (leaders), comparison baselines, and a reproducible
experiment harness.
"""

__version__ = "0.1.0"

from ._core import BACKEND  # noqa: F401

from .errors import (  # noqa: F401
    FollowerDiverged, InfeasibleInitial, InfeasibleSubproblem,
    InvalidOverride, MecGameError, NoConvergence, ScenarioFormatError,
    StabilityViolation,
)
from .model import (  # noqa: F401
    CostBreakdown, DeviceParams, FeasibilityMargins, FeasibilityReport,
    NetworkParams, OspKind, OspParams, PriceVector, StrategyProfile,
    SystemScenario, check_feasible, cost_breakdown, disutility,
    mean_disutility, osp_utility, uplink_rate,
)
from .solver import (  # noqa: F401
    CurvatureTerms, Gradient, Hessian, SolverParams, curvature_terms,
    grad_disutility, hessian_disutility, solve_proximal,
)
from .games import (  # noqa: F401
    CentroidMode, IpoaParams, IpoaResult, LeaderConditionReport, RunTrace,
    check_leader_condition, ipoa, verify_ne,
)
from .pricing import (  # noqa: F401
    IspaParams, IspaResult, MarginalUtility, UpdateMode, blind_pricing, ispa,
    marginal_utility, price_update,
)
from .baselines import (  # noqa: F401
    BaselineKind, PoaReport, SocialOptParams, baseline_profile, poa,
    socially_optimal,
)
from .harness import (  # noqa: F401
    ExperimentSpec, Recipe, ScenarioSpec, default_prices, generate_scenario,
    load_scenario, run_experiment, save_scenario, validate_scenario,
)
