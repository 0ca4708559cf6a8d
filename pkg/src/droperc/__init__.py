"""droperc: dropout seen as percolation on layered networks.

Exact crossing probabilities (closed form, dynamic programme, brute-force
oracle), Monte Carlo samplers with monotone couplings, width-scaling regime
classification, and a masked-SGD harness that measures the displacement
bound those probabilities imply.
"""

from .exact import (
    Prob,
    TransitionKernel,
    as_prob,
    bond_bounds,
    log1mexp,
    site_coupling_bound,
    theta_bond_dp,
    theta_bruteforce,
    theta_site,
)
from .montecarlo import (
    Estimate,
    coupled_sample_p,
    coupled_sample_w,
    estimate_theta,
    sample,
    site_from_bond,
    stream,
)
from .nn import (
    ACTIVATIONS,
    Batch,
    FilterKind,
    FilterMask,
    MlpParams,
    connectivity,
    dropconnect,
    forward,
    full_mask,
    gradient,
    init_params,
    modified,
    original,
    sample_filter,
)
from .scaling import (
    LrSchedule,
    Regime,
    RegimeReport,
    ScalingSpec,
    classify_bond,
    classify_site,
    diagnostic,
    lr_sum,
    training_budget,
    width_at,
)
from .topology import BondConfig, ReachProfile, SiteConfig, Topology, crossing, crossing_reach
from .trainer import (
    DecompositionReport,
    TrainConfig,
    TrainReport,
    filter_theta,
    objective_decomposition,
    run_dropout_sgd,
    theorem_bound,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS",
    "Batch",
    "BondConfig",
    "DecompositionReport",
    "Estimate",
    "FilterKind",
    "FilterMask",
    "LrSchedule",
    "MlpParams",
    "Prob",
    "ReachProfile",
    "Regime",
    "RegimeReport",
    "ScalingSpec",
    "SiteConfig",
    "Topology",
    "TrainConfig",
    "TrainReport",
    "TransitionKernel",
    "as_prob",
    "bond_bounds",
    "classify_bond",
    "classify_site",
    "connectivity",
    "coupled_sample_p",
    "coupled_sample_w",
    "crossing",
    "crossing_reach",
    "diagnostic",
    "dropconnect",
    "estimate_theta",
    "filter_theta",
    "forward",
    "full_mask",
    "gradient",
    "init_params",
    "log1mexp",
    "lr_sum",
    "modified",
    "objective_decomposition",
    "original",
    "run_dropout_sgd",
    "sample",
    "sample_filter",
    "site_coupling_bound",
    "site_from_bond",
    "stream",
    "theorem_bound",
    "theta_bond_dp",
    "theta_bruteforce",
    "theta_site",
    "training_budget",
    "width_at",
]
