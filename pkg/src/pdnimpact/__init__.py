"""Explicit contact-impact dynamics for laminated plates.

A rigid striker and a deformable body are advanced by two coupled
instances that exchange projections and contact forces every step.
Units: mm, s, N, t, MPa (energies in mJ).
"""

from .errors import PdnError
from .mesh import MeshModel, load_mesh, parse_mesh, save_mesh
from .refine import divide_mesh, get_dimensions
from .scenarios import Scenario, build_hertz, build_impact, build_indentation
from .runner import run_scenario
from .config import load_scenario

__version__ = "0.1.0"

__all__ = ["PdnError", "MeshModel", "load_mesh", "parse_mesh", "save_mesh", "divide_mesh",
           "get_dimensions", "Scenario", "build_hertz", "build_impact", "build_indentation",
           "run_scenario", "load_scenario"]
