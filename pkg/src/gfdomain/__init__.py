"""Verified lower bounds on the domains of extended generating functions of symplectic maps."""

from .certify import DomainCertificate, certify_invertible, max_certified_box
from .flows import FlowEnclosure, cell_map, fpu_system, integrate_flow
from .interval import Box, Interval
from .polyalg import MultivarPoly, PolyMap
from .symplectic import GeneratorType, SymmetricMatrixS, build_alpha, example_maps
from .taylormodel import TaylorModel, TmVector

__version__ = "0.1.0"

__all__ = [
    "Box", "Interval", "MultivarPoly", "PolyMap", "TaylorModel", "TmVector",
    "SymmetricMatrixS", "GeneratorType", "build_alpha", "example_maps",
    "DomainCertificate", "certify_invertible", "max_certified_box",
    "FlowEnclosure", "integrate_flow", "fpu_system", "cell_map",
]
