"""Constructive objects: stopping families, majorants, peeling, equilibrium measures, minimum principles."""

from .equilibrium import KKTResiduals, equilibrium_measure, kkt_residuals
from .harmonic import (
    HarmonicCheck,
    MinPrincipleResult,
    harmonicity_check,
    min_principle_check,
    superharmonicity_check,
    validate_descent_witness,
)
from .majorants import (
    BITREE_LAMBDA_GATE,
    DEFAULT_THETA,
    build_embedding_majorant,
    build_truncated_majorant,
)
from .peeling import PeelingResult, peel_measure, verify_peeling
from .phi import MajorantResult, build_phi_majorant, check_phi_preconditions
from .stopping import build_stopping_family, stopping_members

__all__ = [
    "BITREE_LAMBDA_GATE",
    "DEFAULT_THETA",
    "HarmonicCheck",
    "KKTResiduals",
    "MajorantResult",
    "MinPrincipleResult",
    "PeelingResult",
    "build_embedding_majorant",
    "build_phi_majorant",
    "build_stopping_family",
    "build_truncated_majorant",
    "check_phi_preconditions",
    "equilibrium_measure",
    "harmonicity_check",
    "kkt_residuals",
    "min_principle_check",
    "peel_measure",
    "stopping_members",
    "superharmonicity_check",
    "validate_descent_witness",
    "verify_peeling",
]
