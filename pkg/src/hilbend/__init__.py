"""Hilbert geometry on properly convex projective domains and projective bending."""

from hilbend.errors import *  # noqa: F401,F403
from hilbend.projcore import (  # noqa: F401
    AffineChart,
    ProjHyperplane,
    ProjMap,
    ProjPoint,
    apply_map,
    chart_embed,
    chart_project,
    cross_ratio,
    pole,
)

__version__ = "0.1.0"
