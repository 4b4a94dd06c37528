from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import config_of, rank, same_up_to_scale
from elexform import fixture_names, load_fixture
from elexform.formulation import (
    FormulationError,
    NonSquareSystem,
    assemble,
    assign_branch_currents,
    classify_inductors,
)
from elexform.netlist import SwitchConfig, parse_netlist
from elexform.topology import analyze


def row(system, label):
    (eq,) = [e for e in system.equations if e.label == label]
    return eq


def inductor_rows(system):
    return [e for e in system.equations if e.tag == "InductorCTD"]


# --- switch circuits ---------------------------------------------------------


def test_bridge_rows(fixture):
    system = assemble(fixture("switch_loop").circuit, config_of(fixture("switch_loop")))
    assert system.shape == (30, 30)
    # Our I0 points the other way from the source current, so flip it for comparison.
    flip = {"I0": -1}
    expected_kcl = {
        "A": {"I0": 1, "I1": 1, "I4": 1, "I9": 1},
        "B": {"I1": -1, "I2": 1, "I3": 1, "I6": 1},
        "C": {"I3": -1, "I4": -1, "I5": 1},
        "E": {"I5": -1, "I7": 1, "I11": 1},
        "D": {"I6": -1, "I7": -1, "I8": 1},
        "F": {"I9": -1, "I10": 1, "I11": -1},
    }
    for node, expected in expected_kcl.items():
        terms = {k: v * flip.get(k, 1) for k, v in row(system, f"KCL {node}").terms.items()}
        assert terms == expected, node
    for k, name in enumerate(["S1", "S2", "S3", "S4", "S5", "S6"]):
        assert same_up_to_scale(row(system, f"{name} current").terms, {f"iS({name})": 1, f"I{k + 3}": -1})
    (loop,) = system.rows("LoopKVL")
    assert same_up_to_scale(loop.terms, {"iS(S4)": 1, "iS(S5)": -1, "iS(S3)": -1, "iS(S1)": -1})
    assert same_up_to_scale(row(system, "R5").terms, {"V(E)": 1, "V(F)": -1, "I11": -1})
    assert row(system, "S6 SVD").terms == {"VS(S6)": 1, "V(D)": -1}


def test_bridge_dropping_s4(fixture):
    netlist = fixture("switch_loop")
    system = assemble(netlist.circuit, config_of(netlist), svd_priority=["S4"])
    svd = {e.label for e in system.rows("SVD")}
    assert svd == {f"S{k} SVD" for k in (1, 2, 3, 5, 6)}
    (loop,) = system.rows("LoopKVL")
    assert same_up_to_scale(loop.terms, {"iS(S4)": 1, "iS(S5)": -1, "iS(S3)": -1, "iS(S1)": -1})


def test_off_switch_rows(fixture):
    netlist = fixture("switch_loop")
    system = assemble(netlist.circuit, config_of(netlist, "S3=off"))
    assert row(system, "S3 off").terms == {"iS(S3)": 1}
    assert same_up_to_scale(row(system, "S3 SVD").terms, {"VS(S3)": 1, "V(C)": -1, "V(E)": 1})
    assert not system.rows("LoopKVL")


def test_on_switch_with_drop(fixture):
    netlist = parse_netlist("V1 A 0 dc 5\nS1 A B von=0.7 ctl=g\nR1 B 0 1\n.ctl g 0:on\n")
    system = assemble(netlist.circuit, config_of(netlist))
    eq = row(system, "S1 on")
    assert eq.terms == {"VS(S1)": 1} and eq.rhs == 0.7


def test_von_in_loop_is_refused():
    netlist = parse_netlist(
        "V1 A 0 dc 1\nR1 A B 1\nS1 B C von=0.5 ctl=g1\nS2 B C von=0 ctl=g2\nR2 C 0 1\n"
        ".ctl g1 0:on\n.ctl g2 0:on\n")
    with pytest.raises(FormulationError, match="von=0"):
        assemble(netlist.circuit, config_of(netlist))


def test_floating_section_rows(fixture):
    netlist = fixture("isolated_loop")
    system = assemble(netlist.circuit, config_of(netlist))
    (iso,) = system.rows("Isolation")
    assert same_up_to_scale(iso.terms, {"VS(S1)": 1, "VS(S4)": 1})
    # S2, Vs2, S3 and R3 form one series ring and share one current.
    branches = system.branches
    chains = {branches.of[name][0] for name in ("S2", "Vs2", "S3", "R3")}
    assert len(chains) == 1


def test_isolated_resistor_rows(fixture):
    netlist = fixture("isolated_resistor")
    system = assemble(netlist.circuit, config_of(netlist))
    (iso,) = system.rows("Isolation")
    assert same_up_to_scale(iso.terms, {"VS(S1)": -1, "VS(S2)": 1})
    assert {e.label for e in system.rows("KCL")} == {"KCL A", "KCL C", "KCL D"}


def test_isolation_row_is_needed(fixture):
    # Putting the group's dropped KCL row back in place of the isolation row
    # leaves the group potential undetermined.
    netlist = fixture("isolated_resistor")
    system = assemble(netlist.circuit, config_of(netlist))
    A = np.array(system.A)
    k = system.tags.index("Isolation")
    chain, sign = system.branches.of["R1"]
    A[k] = 0
    A[k, system.variables[f"I{chain}"]] = sign
    assert rank(system.A) == len(A)
    assert rank(A) < len(A)


def test_single_resistor_gets_one_current():
    netlist = parse_netlist("V1 A 0 dc 1\nR1 A 0 2\n")
    branches = assign_branch_currents(netlist.circuit, {})
    assert branches.of["R1"][0] == branches.of["V1"][0]
    assert len(branches.chains) == 1


# --- transformer circuits -----------------------------------------------------


def test_single_inductor_transformer(fixture):
    netlist = fixture("xfmr_single_inductor")
    system = assemble(netlist.circuit, config_of(netlist))
    assert system.shape == (14, 14)
    assert system.inductors.kind == {"L1": "FF"}
    assert system.ff_inductors == ["L1"]
    assert same_up_to_scale(row(system, "L1 current").terms, {"iL(L1)": 1, "I1": -1})
    assert same_up_to_scale(row(system, "X1 ampere-turns").terms, {"ip(X1.p)": 1, "ip(X1.s)": 1})
    assert same_up_to_scale(row(system, "X1.s turns ratio").terms, {"VX(X1.p)": 1, "VX(X1.s)": -1})
    assert same_up_to_scale(row(system, "KCL C").terms, {"I1": 1, "ip(X1.s)": 1})


def test_three_coil_transformer_has_nine_rows(fixture):
    system = assemble(fixture("xfmr_dual_tap").circuit, {})
    rows = [e for e in system.rows("ES") if e.label.startswith("X1")]
    assert len(rows) == 9
    assert same_up_to_scale(row(system, "X1 ampere-turns").terms,
                            {"ip(X1.p)": 1, "ip(X1.s1)": 2, "ip(X1.s2)": 3})
    assert same_up_to_scale(row(system, "X1.s2 turns ratio").terms, {"VX(X1.p)": 3, "VX(X1.s2)": -1})


def test_two_inductor_coupling(fixture):
    system = assemble(fixture("xfmr_two_inductors").circuit, {})
    (ctd,) = inductor_rows(system)
    assert same_up_to_scale(ctd.terms, {"iLd(L1)": 1, "iLd(L2)": -2})
    assert system.inductors.kind == {"L1": "FF", "L2": "FNF"}


def test_series_set_classes(fixture):
    system = assemble(fixture("xfmr_series_set").circuit, {})
    assert system.inductors.kind == {"L1": "FF", "L2": "FNF", "L3": "NF"}
    assert system.ff_inductors == ["L1"]
    assert same_up_to_scale(row(system, "L3 follows L2").terms, {"iLd(L3)": 1, "iLd(L2)": -1})
    assert same_up_to_scale(row(system, "coupling 1").terms, {"iLd(L1)": 1, "iLd(L2)": -2})


def test_cascade_row(fixture):
    system = assemble(fixture("xfmr_cascade").circuit, {})
    (ctd,) = inductor_rows(system)
    # N_p1 N_p2 iL1 - N_s1 N_s2 iL2 = 0 with turns 1:2 and 1:3
    assert same_up_to_scale(ctd.terms, {"iLd(L1)": 1, "iLd(L2)": -6})


def test_parallel_inductors_are_both_free():
    netlist = parse_netlist("V1 A 0 dc 1\nR1 A B 1\nL1 B 0 1e-3\nL2 B 0 2e-3\n")
    system = assemble(netlist.circuit, {})
    assert system.inductors.kind == {"L1": "FF", "L2": "FF"}


def test_inductor_cutset_rows(fixture):
    system = assemble(fixture("inductor_series").circuit, {})
    kind = system.inductors.kind
    assert kind["L1"] == "FF" and kind["L4"] == "NF"
    assert sorted(kind.values()).count("FF") == 2
    (cut,) = system.inductors.cutset_rows
    assert same_up_to_scale(cut, {"L1": 1, "L2": -1, "L3": -1})


DUAL_TAP = (
    "V1 A 0 sin 1 50\nR1 A B 1\nL1 B C 1e-3\n"
    "X1 pri C 0 {p1} sec D 0 {a1} sec E 0 {b1}\n"
    "{mid}"
    "X2 pri H 0 {p2} sec {d2} 0 {a2} sec G 0 {b2}\n"
    "L4 H J 1e-3\nR2 J 0 1\n"
)
turns = st.integers(1, 9)


def dual_tap(p1, a1, b1, p2, a2, b2, shorted):
    mid = "L3 E G 1e-3\n" if shorted else "L2 D F 1e-3\nL3 E G 1e-3\n"
    text = DUAL_TAP.format(p1=p1, a1=a1, b1=b1, p2=p2, a2=a2, b2=b2, mid=mid,
                           d2="D" if shorted else "F")
    circuit = parse_netlist(text).circuit
    return circuit, classify_inductors(circuit, {}, analyze(circuit, {}))


def spans(rows, expected, names):
    rows = [[float(r.get(n, 0)) for n in names] for r in rows]
    expected = [[float(e.get(n, 0)) for n in names] for e in expected]
    return len(rows) == len(expected) == rank(rows) == rank(rows + expected)


@settings(max_examples=60, deadline=None)
@given(turns, turns, turns, turns, turns, turns)
def test_dual_tap_rows(p1, a1, b1, p2, a2, b2):
    circuit, classes = dual_tap(p1, a1, b1, p2, a2, b2, shorted=False)
    expected = [
        {"L1": p1, "L2": -a1, "L3": -b1},
        {"L4": -p2, "L2": a2, "L3": b2},
    ]
    assert spans(classes.coupling_rows, expected, ["L1", "L2", "L3", "L4"])
    assert sorted(classes.kind.values()) == ["FF", "FF", "FNF", "FNF"]


@settings(max_examples=60, deadline=None)
@given(turns, turns, turns, turns, turns, turns)
def test_shorted_dual_tap_row(p1, a1, b1, p2, a2, b2):
    circuit, classes = dual_tap(p1, a1, b1, p2, a2, b2, shorted=True)
    expected = {"L1": p1 * a2, "L3": a1 * b2 - b1 * a2, "L4": -a1 * p2}
    (got,) = classes.coupling_rows
    assert same_up_to_scale(got, expected)


COIL_LINKS = (
    "V1 A 0 sin 1 50\nR1 A B 1\nL1 B C 1e-3\n"
    "X1 pri C 0 {} sec D 0 {} sec E 0 {}\n"
    "X2 pri H 0 {} sec D 0 {} sec E 0 {}\n"
    "L4 H J 1e-3\nR2 J 0 1\n"
)


@pytest.mark.parametrize("x1, x2, coupled", [
    ((1, 2, 3), (1, 3, 2), False),
    ((1, 2, 3), (1, 2, 3), True),
    ((1, 2, 3), (5, 4, 6), True),
    ((2, 1, 5), (3, 2, 7), False),
])
def test_linked_secondaries(x1, x2, coupled):
    circuit = parse_netlist(COIL_LINKS.format(*x1, *x2)).circuit
    classes = classify_inductors(circuit, {}, analyze(circuit, {}))
    (p1, a1, b1), (p2, a2, b2) = x1, x2
    assert (b1 * a2 == a1 * b2) == coupled
    if coupled:
        (got,) = classes.coupling_rows
        assert same_up_to_scale(got, {"L1": p1 * a2, "L4": -a1 * p2})
        assert classes.kind == {"L1": "FF", "L4": "FNF"}
    else:
        assert classes.coupling_rows == ()
        assert classes.kind == {"L1": "FF", "L4": "FF"}


def test_coupling_rows_are_exact_fractions(fixture):
    classes = assemble(fixture("xfmr_dual_tap_shorted").circuit, {}).inductors
    (got,) = classes.coupling_rows
    assert all(isinstance(v, Fraction) and v.denominator == 1 for v in got.values())


# --- structural invariants over every configuration ------------------------------


def every_system():
    for name in fixture_names():
        circuit = load_fixture(name).circuit
        for config in SwitchConfig.every(circuit):
            yield name, circuit, config, assemble(circuit, config)


def test_structural_counts():
    for name, circuit, config, system in every_system():
        tags = system.tags
        on = sum(1 for s in circuit.switches if config[s.name])
        assert tags.count("SVD") + tags.count("LoopKVL") == len(circuit.switches), name
        assert len(circuit.switches) - tags.count("SVD") == len(system.report.loops)
        assert tags.count("LoopKVL") == len(system.report.loops)
        assert tags.count("Isolation") == len(system.report.groups)
        assert on == sum(1 for e in system.rows("BranchAssign") if e.label.split()[0] in config)
        inductor_assign = [e for e in system.rows("BranchAssign")
                           if e.label.split()[0] in {L.name for L in circuit.inductors}]
        assert len(inductor_assign) + tags.count("InductorCTD") == len(circuit.inductors), name
        assert all(e.terms for e in system.equations)
        assert system.shape[0] == system.shape[1]


def test_coupling_rows_are_differentiated_images():
    for name, circuit, config, system in every_system():
        classes = system.inductors
        emitted = {e.label: e.terms for e in inductor_rows(system)}
        for label, group in (("coupling", classes.coupling_rows), ("cutset", classes.cutset_rows)):
            for k, source in enumerate(group):
                assert emitted[f"{label} {k + 1}"] == {f"iLd({n})": float(v) for n, v in source.items()}


def test_non_square_is_reported(monkeypatch, fixture):
    import elexform.formulation as formulation
    monkeypatch.setattr(formulation, "emit_kcl", lambda *args: [])
    with pytest.raises(NonSquareSystem) as info:
        formulation.assemble(fixture("switch_ladder").circuit, config_of(fixture("switch_ladder")))
    assert info.value.n_rows < info.value.n_vars
