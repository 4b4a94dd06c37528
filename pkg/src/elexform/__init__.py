"""Equation formulation and Forward Euler simulation for ideal-switch circuits."""

from importlib import resources

from .formulation import (
    EquationSystem,
    FormulationError,
    NonSquareSystem,
    SingularSystem,
    assemble,
)
from .integrator import SimResult, Waveforms, simulate, simulate_netlist, solve_static
from .netlist import Circuit, ControlSchedule, Netlist, NetlistError, SwitchConfig, Tran, \
    parse_netlist, read_netlist, serialize
from .oracle import OracleParams, oracle_dc, oracle_tran
from .solver import ConfigCache, FactorizedSystem, factorize
from .topology import TopologyReport, analyze

__version__ = "0.1.0"


def fixture_path(name: str):
    """Path of a bundled example netlist, e.g. ``fixture_path("switch_loop")``."""
    return resources.files(__package__) / "circuits" / f"{name}.ckt"


def load_fixture(name: str) -> Netlist:
    return parse_netlist(fixture_path(name).read_text(encoding="utf-8"))


def fixture_names() -> list[str]:
    folder = resources.files(__package__) / "circuits"
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".ckt"))
