"""Randomized and exhaustive experiments measuring the potential-theoretic inequalities."""

from .generator import (
    LAWS,
    MAX_RESAMPLES,
    NORMALIZATIONS,
    GeneratorSpec,
    gen_random_measure,
    normalize,
    splitmix64,
    sub_seed,
)
from .report import Check, ExperimentReport, fit_loglog, holds_le, stats
from .runners import (
    DEFAULT_DELTAS,
    DEFAULT_LAMBDAS,
    EXPERIMENTS,
    box_statistic,
    level_set_capture,
    level_set_split,
    mutual_split_observables,
    run_box_decay,
    run_level_set_capture,
    run_mass_decay,
    run_mutual_energy_split,
    run_rec_to_embedding,
    run_truncation_loss,
    sample_nested_sets,
    truncation_observables,
)

__all__ = [
    "Check",
    "DEFAULT_DELTAS",
    "DEFAULT_LAMBDAS",
    "EXPERIMENTS",
    "ExperimentReport",
    "GeneratorSpec",
    "LAWS",
    "MAX_RESAMPLES",
    "NORMALIZATIONS",
    "box_statistic",
    "fit_loglog",
    "gen_random_measure",
    "holds_le",
    "level_set_capture",
    "level_set_split",
    "mutual_split_observables",
    "normalize",
    "run_box_decay",
    "run_level_set_capture",
    "run_mass_decay",
    "run_mutual_energy_split",
    "run_rec_to_embedding",
    "run_truncation_loss",
    "sample_nested_sets",
    "splitmix64",
    "stats",
    "sub_seed",
    "truncation_observables",
]
