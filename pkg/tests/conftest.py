from fractions import Fraction

import numpy as np
import pytest

from elexform import load_fixture
from elexform.netlist import SwitchConfig


@pytest.fixture
def fixture():
    """Load a bundled netlist by name."""
    return load_fixture


def config_of(netlist, text=""):
    circuit = netlist.circuit
    return SwitchConfig.parse(circuit, text, netlist.schedule.config_at(circuit, 0.0))


def same_up_to_scale(row, expected):
    """True when two coefficient maps are proportional (exact for fractions)."""
    row = {k: Fraction(v) for k, v in row.items() if v != 0}
    expected = {k: Fraction(v) for k, v in expected.items() if v != 0}
    if set(row) != set(expected):
        return False
    key = next(iter(expected))
    scale = row[key] / expected[key]
    return all(row[k] == scale * expected[k] for k in expected)


def rank(matrix):
    return int(np.linalg.matrix_rank(np.asarray(matrix, dtype=float)))
