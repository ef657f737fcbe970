"""Exact solvers and landscape analysis for weighted MAX-2-SAT / Ising minimization."""

from spinscape.instance import (
    Assignment,
    DegreeGraph,
    EnumerationLimitError,
    IsingInstance,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "DegreeGraph",
    "EnumerationLimitError",
    "IsingInstance",
    "__version__",
]
