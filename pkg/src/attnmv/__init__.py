"""Equilibrium mean-variance investment with controllable attention.

Numerical solver for the closed-loop equilibrium of a mean-variance
investor in a market whose coefficients switch with a hidden regime chain,
observed through a signal whose precision (attention) is itself a costly
control.  The coupled value/auxiliary-mean recursion is solved by backward
induction on a locally consistent approximating chain over the joint
wealth-belief lattice, and verified against independent Monte-Carlo
simulation of both the chain and the filtered dynamics.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, SchemeError
from .filtering import (filter_diffusion, filter_drift, filter_step,
                        full_belief, zeta_bar)
from .kernel import (TransitionStencil, check_local_consistency,
                     diffusion_bar_sq, drift_bar, stencil)
from .lattice import GridSpec, Lattice, LatticeNode, build_grid
from .market import (ControlPoint, RegimeModel, example_model, info_cost,
                     load_model, theta, validate_model)
from .oracle import (ConstantPolicy, FeedbackPolicy, McSummary,
                     marginal_check, simulate_chain, simulate_sde)
from .solver import (ControlGrid, SolutionFields, candidate_value,
                     g_correction, optimize_node, ratio_policy, solve,
                     spike_check, spike_margins, step_back)

__all__ = [
    "ConfigError", "DomainError", "SchemeError",
    "filter_diffusion", "filter_drift", "filter_step", "full_belief",
    "zeta_bar",
    "TransitionStencil", "check_local_consistency", "diffusion_bar_sq",
    "drift_bar", "stencil",
    "GridSpec", "Lattice", "LatticeNode", "build_grid",
    "ControlPoint", "RegimeModel", "example_model", "info_cost",
    "load_model", "theta", "validate_model",
    "ConstantPolicy", "FeedbackPolicy", "McSummary", "marginal_check",
    "simulate_chain", "simulate_sde",
    "ControlGrid", "SolutionFields", "candidate_value", "g_correction",
    "optimize_node", "ratio_policy", "solve", "spike_check",
    "spike_margins", "step_back",
    "__version__",
]
