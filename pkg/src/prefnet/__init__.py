"""Preference spread over social networks and representative-set selection."""

from .prefmath import CapacityError, PreferenceError, kendall_tau, norm_kt, perm_table
from .distmodel import DistributionError, EdgeDistribution, discretize, fit_mle
from .network import Network, NetworkError, generate_synthetic, load_network
from .spread import SpreadConfig, TopicProfiles, build_tr_table, msm_sp, simulate
from .voting import AggregateSet, RuleSpec, aggregate, delta, expected_delta
from .selection import SelectionError, SelectionResult, greedy_select, psi, random_poll, rho

__version__ = "0.1.0"

__all__ = [
    "AggregateSet",
    "CapacityError",
    "DistributionError",
    "EdgeDistribution",
    "Network",
    "NetworkError",
    "PreferenceError",
    "RuleSpec",
    "SelectionError",
    "SelectionResult",
    "SpreadConfig",
    "TopicProfiles",
    "aggregate",
    "build_tr_table",
    "delta",
    "discretize",
    "expected_delta",
    "fit_mle",
    "generate_synthetic",
    "greedy_select",
    "kendall_tau",
    "load_network",
    "msm_sp",
    "norm_kt",
    "perm_table",
    "psi",
    "random_poll",
    "rho",
    "simulate",
]
