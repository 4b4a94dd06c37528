import dataclasses

import numpy as np
import pytest
from scipy.linalg import lu_solve

from conftest import config_of, rank
from elexform.formulation import SingularSystem, TAGS, assemble
from elexform.integrator import solve_static
from elexform.solver import ConfigCache, factorize, factorize_matrix
from elexform.netlist import SwitchConfig


def test_one_by_one():
    lu, piv, bad = factorize_matrix(np.array([[2.0]]))
    assert bad is None
    assert lu_solve((lu, piv), np.array([4.0]))[0] == 2.0


def test_identity_system(fixture):
    system = assemble(fixture("switch_loop").circuit, config_of(fixture("switch_loop")))
    identity = dataclasses.replace(system)
    object.__setattr__(identity, "A", np.eye(system.shape[0]))
    factored = factorize(identity)
    e3 = np.zeros(system.shape[0])
    e3[3] = 1.0
    assert np.array_equal(factored.solve(e3), e3)


def test_bridge_is_nonsingular(fixture):
    netlist = fixture("switch_loop")
    system = assemble(netlist.circuit, config_of(netlist))
    factored = factorize(system)
    assert np.isfinite(factored.condition)
    inverse = factored.solve(np.eye(system.shape[0]))
    assert np.allclose(system.A @ inverse, np.eye(system.shape[0]), atol=1e-10)


def test_dropped_svd_instead_of_loop_row_is_singular(fixture):
    netlist = fixture("switch_loop")
    system = assemble(netlist.circuit, config_of(netlist))
    (drop,) = system.report.dropped_svd
    k = system.tags.index("LoopKVL")
    svd = dataclasses.replace(
        system.rows("SVD")[0], label=f"{drop} SVD",
        terms={f"VS({drop})": 1.0, "V(E)": -1.0, "V(D)": 1.0})
    equations = list(system.equations)
    equations[k] = svd
    broken = dataclasses.replace(system, equations=equations)
    assert rank(broken.A) < broken.shape[0]
    with pytest.raises(SingularSystem) as info:
        factorize(broken)
    assert info.value.tag in TAGS
    assert info.value.label


def test_loop_row_deleted_is_singular(fixture):
    netlist = fixture("switch_loop")
    system = assemble(netlist.circuit, config_of(netlist))
    k = system.tags.index("LoopKVL")
    equations = list(system.equations)
    # Keep the matrix square by duplicating another row in its place.
    equations[k] = equations[0]
    with pytest.raises(SingularSystem):
        factorize(dataclasses.replace(system, equations=equations))


@pytest.mark.parametrize("name", ["switch_loop", "isolated_loop", "xfmr_dual_tap", "inductor_series"])
def test_residual_bound(fixture, name):
    netlist = fixture(name)
    system = assemble(netlist.circuit, config_of(netlist))
    il = {L.name: 0.3 for L in netlist.circuit.inductors}
    b = system.rhs(1e-3, il)
    x = factorize(system).solve(b)
    bound = 1e-9 * (np.abs(system.A).sum(axis=1).max() * np.abs(x).max() + np.abs(b).max())
    assert np.abs(system.A @ x - b).max() <= bound


def test_solve_is_deterministic(fixture):
    netlist = fixture("xfmr_dual_tap")
    first = solve_static(netlist.circuit, {}, 1e-3, {"L1": 0.1, "L2": 0.2})[1]
    second = solve_static(netlist.circuit, {}, 1e-3, {"L1": 0.1, "L2": 0.2})[1]
    assert np.array_equal(first, second)


def test_unit_ratio_transformer_copies_voltage(fixture):
    system, x = solve_static(fixture("xfmr_single_inductor").circuit, {}, 2e-3)
    index = system.variables
    assert x[index["V(C)"]] == pytest.approx(x[index["V(B)"]], abs=1e-15)
    assert abs(x[index["V(B)"]]) > 0


def test_rhs_length_is_checked(fixture):
    factored = factorize(assemble(fixture("rl_loop").circuit, {}))
    with pytest.raises(ValueError):
        factored.solve(np.zeros(1))


def test_cache_hits_and_lru(fixture):
    circuit = fixture("switch_ladder").circuit
    built = []

    def build(mask):
        built.append(mask)
        return factorize(assemble(circuit, SwitchConfig.from_mask(circuit, mask)))

    cache = ConfigCache(build, capacity=2)
    first = cache.get(0b111111)
    assert cache.get(0b111111) is first
    cache.get(0b111110)
    cache.get(0b111111)
    cache.get(0b111100)  # evicts 0b111110, the least recently used
    assert 0b111110 not in cache and 0b111111 in cache
    assert cache.active == 0b111100
    assert cache.factorizations == len(built) == 3
    assert len(cache) == 2


def test_cache_keeps_the_active_entry():
    cache = ConfigCache(lambda mask: mask, capacity=1)
    for mask in (1, 2, 3):
        assert cache.get(mask) == mask
        assert mask in cache and cache.active == mask
    with pytest.raises(ValueError):
        ConfigCache(lambda mask: mask, capacity=0)
