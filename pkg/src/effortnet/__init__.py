"""Effort games on influencer-influencee networks.

Equilibrium solvers, uniqueness certificates, social output and price of
anarchy, stability of effort profiles and reward-scheme design.  Node ids
are 0-based in the library and 1-based in files and on the command line.
"""
__version__ = "0.1.0"

from .design import (
    DesignResult,
    Guarantee,
    StabilityResult,
    check_stability,
    design_reward_scheme,
    stability_coefficients,
    stability_lp,
)
from .equilibrium import (
    EquilibriumResult,
    UniquenessCertificate,
    Verdict,
    effort_update,
    effort_update_tree,
    h_max,
    jacobian_G,
    scalar_best_response,
    solve_equilibrium,
    solve_equilibrium_fixed_point,
    solve_equilibrium_tree,
    spectral_norm,
    uniqueness_certificate_general,
    uniqueness_certificate_tree,
)
from .errors import *  # noqa: F401,F403
from .lp import Constraint, LpFeasibilityProblem, LpOutcome, solve_feasibility
from .model import (
    MU_ONE,
    Attenuation,
    EpParams,
    EpProduct,
    EpQuadratic,
    Kind,
    LinearProduct,
    NetworkTopology,
    RewardScheme,
    balanced,
    chain,
    efor,
    flat,
    fractional_productivity,
    from_retained_shares,
    mu_power,
    payoff,
    payoff_gradient,
    productivity,
    random_hierarchy,
    social_output,
    validate_topology,
)
from .welfare import PoaReport, optimal_effort, poa, poa_bound_balanced, xi
