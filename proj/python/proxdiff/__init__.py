"""Conditional proximal diffusion sampling at desk scale.

Thin re-export of the compiled core; see the C++ headers for contracts.
"""

from ._core import (
    MixtureTarget,
    Net,
    NoiseSchedule,
    TimeGrid,
    alpha_at,
    beta_at,
    energy_distance,
    load_checkpoint,
    make_time_grid,
    oracle_logpdf,
    oracle_prox,
    oracle_score,
    pda_hybrid_gaussian_moments,
    prox_residual,
    run_experiment,
    sample_chain,
    sample_oracle,
    target_samples,
)

__all__ = [
    "MixtureTarget",
    "Net",
    "NoiseSchedule",
    "TimeGrid",
    "alpha_at",
    "beta_at",
    "energy_distance",
    "load_checkpoint",
    "make_time_grid",
    "oracle_logpdf",
    "oracle_prox",
    "oracle_score",
    "pda_hybrid_gaussian_moments",
    "prox_residual",
    "run_experiment",
    "sample_chain",
    "sample_oracle",
    "target_samples",
]
