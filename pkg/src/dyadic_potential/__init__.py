"""Discrete potential theory on dyadic trees and bi-trees.

Geometry and measures live in :mod:`.geometry`, the Hardy operators and
energies in :mod:`.hardy`, the five embedding constants in :mod:`.constants`,
the certified constructions in :mod:`.constructive` and the randomized
drivers in :mod:`.experiments`.
"""

from .config import Config
from .constants import (
    ConstantReport,
    OrderingReport,
    SearchStrategy,
    box_constant,
    carleson_constant,
    embedding_constant,
    hereditary_constant,
    ordering_report,
    rec_constant,
)
from .errors import (
    CertificateError,
    ConvergenceError,
    DyadicError,
    GeneratorError,
    GeometryError,
    ParseError,
    PreconditionError,
    SizeLimitError,
)
from .geometry import (
    BiTreeGeometry,
    BoundaryMeasure,
    BoundarySet,
    NodeFunction,
    NodeSet,
    Order,
    StoppingFamily,
    TreeGeometry,
    build_bitree,
    build_tree,
    generation,
    order_relation,
    restrict_measure,
    shadow_and_downset,
)
from .hardy import (
    EnergyReport,
    PotentialField,
    adjoint_sum,
    boundary_kernel,
    energy,
    energy_by_integration,
    hardy_sum,
    kernel_matrix,
    mutual_energy,
    potential,
    truncation_set,
)

__version__ = "0.1.0"

__all__ = [
    "BiTreeGeometry",
    "BoundaryMeasure",
    "BoundarySet",
    "CertificateError",
    "Config",
    "ConstantReport",
    "ConvergenceError",
    "DyadicError",
    "EnergyReport",
    "GeneratorError",
    "GeometryError",
    "NodeFunction",
    "NodeSet",
    "Order",
    "OrderingReport",
    "ParseError",
    "PotentialField",
    "PreconditionError",
    "SearchStrategy",
    "SizeLimitError",
    "StoppingFamily",
    "TreeGeometry",
    "adjoint_sum",
    "boundary_kernel",
    "box_constant",
    "build_bitree",
    "build_tree",
    "carleson_constant",
    "embedding_constant",
    "energy",
    "energy_by_integration",
    "generation",
    "hardy_sum",
    "hereditary_constant",
    "kernel_matrix",
    "mutual_energy",
    "order_relation",
    "ordering_report",
    "potential",
    "rec_constant",
    "restrict_measure",
    "shadow_and_downset",
    "truncation_set",
]
