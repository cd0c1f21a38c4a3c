"""Statistical-query lower bounds for planted bipartite structure, made executable."""

__version__ = "0.1.0"

from .distributions import (  # noqa: E402
    ParityDistribution,
    PlantedDistribution,
    ReferenceDistribution,
    exact_expectation,
    mass,
)
from .oracles import OracleSpec, make_session  # noqa: E402
from .points import IndexSet, Point  # noqa: E402

__all__ = [
    "IndexSet",
    "OracleSpec",
    "ParityDistribution",
    "PlantedDistribution",
    "Point",
    "ReferenceDistribution",
    "exact_expectation",
    "make_session",
    "mass",
]
