"""Exact integer Khovanov homology with link cobordism maps.

The package computes bigraded homology groups of link diagrams over the
integers, builds the chain maps induced by movies of elementary cobordisms,
and evaluates the resulting functionals on homology classes. Everything is
exact: no floating point enters any homological computation.
"""

__version__ = "0.1.0"

from .link_core import (
    Diagram,
    PDError,
    PDSyntaxError,
    PDArcError,
    PDOrientationError,
    TwistFamilyTemplate,
    parse_pd,
    serialize,
    canonical_form,
    mirror,
    disjoint_union,
    braid_closure,
    torus_link,
    pretzel,
    instantiate,
    jones_state_sum,
    linking_number,
)
from .khovanov import (
    CONVENTION_VERSION,
    BigradedChainComplex,
    LeeComplexQ,
    ChainMapData,
    BigradedGroup,
    GroupSummand,
    LeeCycle,
    SimplifyResult,
    build_complex,
    lee_complex,
    simplify,
    eliminate_pairs,
    homology,
    lee_generator,
    filtration_degree,
)

__all__ = [
    "__version__",
    "Diagram",
    "PDError",
    "PDSyntaxError",
    "PDArcError",
    "PDOrientationError",
    "TwistFamilyTemplate",
    "parse_pd",
    "serialize",
    "canonical_form",
    "mirror",
    "disjoint_union",
    "braid_closure",
    "torus_link",
    "pretzel",
    "instantiate",
    "jones_state_sum",
    "linking_number",
    "CONVENTION_VERSION",
    "BigradedChainComplex",
    "LeeComplexQ",
    "ChainMapData",
    "BigradedGroup",
    "GroupSummand",
    "LeeCycle",
    "SimplifyResult",
    "build_complex",
    "lee_complex",
    "simplify",
    "eliminate_pairs",
    "homology",
    "lee_generator",
    "filtration_degree",
]
