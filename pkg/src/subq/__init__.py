"""Submodular analysis and optimization: oracles, minimization, proximal problems."""
from .core import (
    BaseVector,
    CapabilityError,
    FunctionOracle,
    GroundSet,
    InputError,
    NumericalError,
    PreconditionError,
    SetFunction,
    greedy,
    in_polyhedron,
    is_submodular_bruteforce,
    lovasz,
)

__version__ = "0.1.0"
