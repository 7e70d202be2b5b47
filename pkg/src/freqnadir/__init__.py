"""Nadir computation, analytic nadir bounds and droop gain tuning for linearized power networks."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"

from .bounds import MajorantProfile, estimate_G, majorant, majorant1, majorant2
from .nadir import nadir_F
from .netmodel import NetworkModel, assemble_system, load_network, parse_network
from .optimizer import TuningConfig, evaluate_objective, feasibility, hooke_jeeves, minimize_nadir
from .spectral import eigendecompose, equilibrium_frequency, regularize
from .trajectory import analyze, integrate_reference, omega_at


def fixture_path(name: str) -> Path:
    """Path of a bundled network, e.g. ``fixture_path("fixture3")``."""
    return Path(str(resources.files(__package__) / "data" / f"{name}.net"))


__all__ = [
    "MajorantProfile",
    "NetworkModel",
    "TuningConfig",
    "analyze",
    "assemble_system",
    "eigendecompose",
    "equilibrium_frequency",
    "estimate_G",
    "evaluate_objective",
    "feasibility",
    "fixture_path",
    "hooke_jeeves",
    "integrate_reference",
    "load_network",
    "majorant",
    "majorant1",
    "majorant2",
    "minimize_nadir",
    "nadir_F",
    "omega_at",
    "parse_network",
    "regularize",
]
