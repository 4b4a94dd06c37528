"""Assembly of the square linear system for one switch configuration.

Unknowns are node voltages, branch currents, switch auxiliaries ``VS``/``iS``,
inductor auxiliaries ``iL``/``iLd`` and transformer coil auxiliaries.  Rows
are element stamps (ES) plus topology dependent rows: switch voltage
definitions (SVD), loop KVL, isolation constraints, branch assignments and
inductor coupling constraints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .netlist import (
    Circuit,
    Coil,
    CurrentSource,
    Inductor,
    Resistor,
    Switch,
    SwitchConfig,
    Transformer,
    VoltageSource,
)
from .topology import TopologyReport, analyze, series_classes

TAGS = ("KCL", "ES", "SVD", "LoopKVL", "Isolation", "BranchAssign", "InductorCTD")

# Relative size below which an elimination coefficient counts as cancelled.
DEGENERACY_TOL = 1e-9


class FormulationError(Exception):
    """The configuration cannot be turned into a solvable system."""


class NonSquareSystem(FormulationError):
    def __init__(self, n_rows: int, n_vars: int, tag_counts: Mapping[str, int]):
        self.n_rows, self.n_vars, self.tag_counts = n_rows, n_vars, dict(tag_counts)
        counts = ", ".join(f"{t}={c}" for t, c in self.tag_counts.items())
        super().__init__(f"{n_rows} equations for {n_vars} unknowns ({counts})")


class SingularSystem(FormulationError):
    def __init__(self, message: str, tag: str | None = None, label: str | None = None):
        self.tag, self.label = tag, label
        super().__init__(message)


# --- variables and equations ---------------------------------------------------


class VariableIndex:
    """Ordered registry of unknowns; looking up a missing name raises KeyError."""

    def __init__(self, names: Sequence[str]):
        self.names = tuple(names)
        self._slot = {name: k for k, name in enumerate(self.names)}
        if len(self._slot) != len(self.names):
            raise ValueError("duplicate variable names")

    def __getitem__(self, name: str) -> int:
        return self._slot[name]

    def __contains__(self, name: str) -> bool:
        return name in self._slot

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(self.names)


def v_node(node: str) -> str:
    return f"V({node})"


def i_branch(k: int) -> str:
    return f"I{k}"


@dataclass
class Equation:
    tag: str
    label: str
    terms: dict[str, float]
    rhs: float = 0.0
    # None, ("source", element name) or ("inductor", inductor name)
    binding: tuple[str, str] | None = None

    def __post_init__(self):
        self.terms = {k: v for k, v in self.terms.items() if v != 0}
        if not self.terms:
            raise AssertionError(f"equation {self.label} has no terms")


@dataclass(frozen=True)
class BranchAssignment:
    """Branch currents: ``current(element) = sign * I<chain>``."""

    chains: tuple[tuple[tuple[str, int], ...], ...]
    of: Mapping[str, tuple[int, int]]
    merged_nodes: frozenset[str]
    rings: frozenset[int]

    def term(self, element: str, scale: float = 1.0) -> dict[str, float]:
        chain, sign = self.of[element]
        return {i_branch(chain): scale * sign}


@dataclass(frozen=True)
class InductorClass:
    kind: Mapping[str, str]  # FF | FNF | NF | pathless
    partner: Mapping[str, tuple[str, int]]  # NF -> (F, sigma)
    coupling_rows: tuple[Mapping[str, Fraction], ...]
    coil_substitutions: Mapping[str, tuple[str, int]]
    cutset_rows: tuple[Mapping[str, Fraction], ...] = ()


@dataclass
class EquationSystem:
    circuit: Circuit
    config: SwitchConfig
    variables: VariableIndex
    equations: list[Equation]
    report: TopologyReport
    branches: BranchAssignment
    inductors: InductorClass
    A: np.ndarray = field(init=False, repr=False)
    b0: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.variables)
        self.A = np.zeros((len(self.equations), n))
        self.b0 = np.zeros(len(self.equations))
        self._source_rows: list[tuple[int, object]] = []
        self._inductor_rows: list[tuple[int, str]] = []
        for row, eq in enumerate(self.equations):
            for name, coef in eq.terms.items():
                self.A[row, self.variables[name]] += coef
            self.b0[row] = eq.rhs
            if eq.binding is not None:
                kind, name = eq.binding
                if kind == "source":
                    self._source_rows.append((row, self.circuit[name].waveform))
                else:
                    self._inductor_rows.append((row, name))
        self.A.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    @property
    def tags(self) -> list[str]:
        return [eq.tag for eq in self.equations]

    def rows(self, tag: str) -> list[Equation]:
        return [eq for eq in self.equations if eq.tag == tag]

    @property
    def ff_inductors(self) -> list[str]:
        return [name for _, name in self._inductor_rows]

    def rhs(self, t: float, il_next: Mapping[str, float] | None = None) -> np.ndarray:
        """Right-hand side at time ``t``, with ``il_next`` feeding FF inductor rows."""
        b = self.b0.copy()
        for row, waveform in self._source_rows:
            b[row] = waveform(t)
        for row, name in self._inductor_rows:
            b[row] = il_next[name] if il_next is not None else 0.0
        return b

    def describe(self) -> str:
        width = max(len(t) for t in TAGS)
        lines = [f"# {self.config.to_text() or '(no switches)'}: "
                 f"{len(self.equations)} equations, {len(self.variables)} unknowns"]
        for eq in self.equations:
            lhs = _format_terms(eq.terms, self.variables)
            if eq.binding is None:
                rhs = _fmt_num(eq.rhs)
            elif eq.binding[0] == "source":
                rhs = f"{eq.binding[1]}(t)"
            else:
                rhs = f"{eq.binding[1]}^(n+1)"
            lines.append(f"{eq.tag:<{width}}  {eq.label}: {lhs} = {rhs}")
        return "\n".join(lines) + "\n"


def _fmt_num(x: float) -> str:
    return f"{x:.12g}"


def _format_terms(terms: Mapping[str, float], variables: VariableIndex) -> str:
    parts = []
    for name in sorted(terms, key=variables.__getitem__):
        coef = terms[name]
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = name if mag == 1 else f"{_fmt_num(mag)}*{name}"
        parts.append(f"{sign} {body}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else "-" + text[2:]


# --- branch current assignment ----------------------------------------------------


def _conducting_two_terminal(circuit: Circuit, config: Mapping[str, bool]):
    return [
        e for e in circuit.elements
        if not isinstance(e, Transformer) and not (isinstance(e, Switch) and not config[e.name])
    ]


def assign_branch_currents(circuit: Circuit, config: Mapping[str, bool]) -> BranchAssignment:
    """One current per chain of elements joined at plain two-branch nodes.

    A non-reference node with exactly two conducting branches, neither of them a
    transformer coil, carries the same current through both, so the two share a
    variable and the node needs no KCL row.  Chains are numbered by their first
    element in netlist order; signs make that element's current +I.
    """
    elements = _conducting_two_terminal(circuit, config)
    at_node: dict[str, list] = {n: [] for n in circuit.nodes}
    coil_nodes = set()
    for element in elements:
        for node in element.nodes:
            at_node[node].append(element)
    for coil in circuit.coils:
        coil_nodes.update(coil.nodes)
    merged = frozenset(
        n for n in circuit.signal_nodes
        if len(at_node[n]) == 2 and n not in coil_nodes
    )

    of: dict[str, tuple[int, int]] = {}
    chains = []
    rings = set()
    for seed in elements:
        if seed.name in of:
            continue
        index = len(chains)
        members = {seed.name: 1}
        frontier = [seed]
        while frontier:
            element = frontier.pop()
            sign = members[element.name]
            for node in element.nodes:
                if node not in merged:
                    continue
                pair = at_node[node]
                other = pair[1] if pair[0] is element else pair[0]
                # Same direction through the node keeps the sign.
                same = (node == element.p) != (node == other.p)
                other_sign = sign if same else -sign
                if other.name in members:
                    if members[other.name] != other_sign:
                        raise AssertionError(f"inconsistent chain signs at node {node}")
                    continue
                members[other.name] = other_sign
                frontier.append(other)
        ordered = tuple((e.name, members[e.name]) for e in elements if e.name in members)
        for name, sign in ordered:
            of[name] = (index, sign)
        chain_nodes = {n for name, _ in ordered for n in circuit[name].nodes}
        if chain_nodes <= merged:
            rings.add(index)
        chains.append(ordered)
    return BranchAssignment(tuple(chains), of, merged, frozenset(rings))


def build_variables(circuit: Circuit, branches: BranchAssignment) -> VariableIndex:
    names = [v_node(n) for n in circuit.signal_nodes]
    names += [i_branch(k) for k in range(len(branches.chains))]
    names += [f"VS({s.name})" for s in circuit.switches]
    names += [f"iS({s.name})" for s in circuit.switches]
    names += [f"iL({L.name})" for L in circuit.inductors]
    names += [f"iLd({L.name})" for L in circuit.inductors]
    names += [f"VX({c.name})" for c in circuit.coils]
    names += [f"ip({c.name})" for c in circuit.coils]
    names += [f"in({c.name})" for c in circuit.coils]
    return VariableIndex(names)


def _voltage_terms(circuit: Circuit, p: str, n: str, scale: float = 1.0) -> dict[str, float]:
    terms: dict[str, float] = {}
    if p != circuit.reference:
        terms[v_node(p)] = scale
    if n != circuit.reference:
        terms[v_node(n)] = terms.get(v_node(n), 0.0) - scale
    return terms


def _merge(*parts: Mapping[str, float]) -> dict[str, float]:
    out: dict[str, float] = {}
    for part in parts:
        for k, v in part.items():
            out[k] = out.get(k, 0.0) + v
    return out


# --- element stamps -------------------------------------------------------------


def stamp_element_equations(
    circuit: Circuit, config: Mapping[str, bool], branches: BranchAssignment
) -> list[Equation]:
    """ES rows for resistors, sources, switches, inductors and transformers.

    Inductor rows here are only ``V(p) - V(n) = L*iLd``; the rows tying
    ``iL`` to the branch current depend on the inductor class.
    """
    rows: list[Equation] = []
    for element in circuit.elements:
        name = element.name
        if isinstance(element, Resistor):
            rows.append(Equation("ES", f"{name}", _merge(
                _voltage_terms(circuit, element.p, element.n),
                branches.term(name, -element.resistance))))
        elif isinstance(element, VoltageSource):
            rows.append(Equation("ES", f"{name}", _voltage_terms(circuit, element.p, element.n),
                                 binding=("source", name)))
        elif isinstance(element, CurrentSource):
            rows.append(Equation("ES", f"{name}", branches.term(name), binding=("source", name)))
        elif isinstance(element, Switch):
            if config[name]:
                rows.append(Equation("ES", f"{name} on", {f"VS({name})": 1.0}, element.v_on))
            else:
                rows.append(Equation("ES", f"{name} off", {f"iS({name})": 1.0}))
        elif isinstance(element, Inductor):
            rows.append(Equation("ES", f"{name} V=L*iLd", _merge(
                _voltage_terms(circuit, element.p, element.n),
                {f"iLd({name})": -element.inductance})))
        elif isinstance(element, Transformer):
            rows.extend(_transformer_rows(circuit, element))
    return rows


def _transformer_rows(circuit: Circuit, xfmr: Transformer) -> list[Equation]:
    rows = []
    for coil in xfmr.coils:
        rows.append(Equation("ES", f"{coil.name} voltage", _merge(
            {f"VX({coil.name})": 1.0}, _voltage_terms(circuit, coil.p, coil.n, -1.0))))
    primary = xfmr.primary
    for coil in xfmr.secondaries:
        rows.append(Equation("ES", f"{coil.name} turns ratio", {
            f"VX({primary.name})": coil.turns, f"VX({coil.name})": -primary.turns}))
    rows.append(Equation("ES", f"{xfmr.name} ampere-turns",
                         {f"ip({c.name})": c.turns for c in xfmr.coils}))
    for coil in xfmr.coils:
        rows.append(Equation("ES", f"{coil.name} terminal currents",
                             {f"ip({coil.name})": 1.0, f"in({coil.name})": 1.0}))
    return rows


# --- KCL and switch CTD rows ------------------------------------------------------


def _kcl_terms(
    circuit: Circuit, config: Mapping[str, bool], branches: BranchAssignment
) -> dict[str, dict[str, float]]:
    terms: dict[str, dict[str, float]] = {n: {} for n in circuit.signal_nodes}
    for element in _conducting_two_terminal(circuit, config):
        chain, sign = branches.of[element.name]
        var = i_branch(chain)
        for node, direction in ((element.p, 1.0), (element.n, -1.0)):
            if node in terms:
                terms[node][var] = terms[node].get(var, 0.0) + direction * sign
    for coil in circuit.coils:
        if coil.p in terms:
            terms[coil.p][f"ip({coil.name})"] = 1.0
        if coil.n in terms:
            terms[coil.n][f"in({coil.name})"] = 1.0
    return {n: {k: v for k, v in t.items() if v != 0} for n, t in terms.items()}


def emit_kcl(
    circuit: Circuit, config: Mapping[str, bool], report: TopologyReport, branches: BranchAssignment
) -> list[Equation]:
    """One row per node that is not merged, minus one row per isolated group."""
    terms = _kcl_terms(circuit, config, branches)
    dropped = set()
    for group in report.groups:
        for node in group.nodes:
            if node not in branches.merged_nodes and terms.get(node):
                dropped.add(node)
                break
    rows = []
    for node in circuit.signal_nodes:
        if node in branches.merged_nodes or node in dropped or not terms[node]:
            continue
        rows.append(Equation("KCL", f"KCL {node}", terms[node]))
    return rows


def emit_switch_ctd(
    circuit: Circuit, config: Mapping[str, bool], report: TopologyReport, branches: BranchAssignment
) -> list[Equation]:
    rows = []
    dropped = set(report.dropped_svd)
    for switch in circuit.switches:
        if switch.name in dropped:
            continue
        rows.append(Equation("SVD", f"{switch.name} SVD", _merge(
            {f"VS({switch.name})": 1.0},
            _voltage_terms(circuit, switch.p, switch.n, -1.0))))
    for loop, drop in zip(report.loops, report.dropped_svd):
        for name in loop.switches:
            if circuit[name].v_on != 0:
                raise FormulationError(
                    f"switch {name} with von={circuit[name].v_on} lies in switch loop "
                    f"{','.join(loop.switches)}; loops require von=0")
        rows.append(Equation("LoopKVL", f"loop {','.join(loop.switches)} (drop {drop})",
                             {f"iS({n})": float(o) for n, o in loop.members}))
    for group in report.groups:
        rows.append(Equation("Isolation", f"isolated {','.join(group.nodes)}",
                             {f"VS({n})": float(o) for n, o in group.boundary}))
    for switch in circuit.switches:
        if config[switch.name]:
            rows.append(Equation("BranchAssign", f"{switch.name} current", _merge(
                {f"iS({switch.name})": 1.0}, branches.term(switch.name, -1.0))))
    return rows


# --- inductors and transformer coupling ----------------------------------------------


def _nonzero(coef: Fraction, scale: Fraction) -> bool:
    return coef != 0 and abs(coef) > DEGENERACY_TOL * scale


def _row_scale(row: Mapping[str, Fraction]) -> Fraction:
    return max((abs(v) for v in row.values()), default=Fraction(0))


def _eliminate(rows: list[dict[str, Fraction]], pivot_row: dict[str, Fraction], col: str) -> None:
    pivot = pivot_row[col]
    for row in rows:
        if row is pivot_row or row.get(col, 0) == 0:
            continue
        factor = row[col] / pivot
        for key, value in pivot_row.items():
            row[key] = row.get(key, Fraction(0)) - factor * value
        for key in [k for k, v in row.items() if v == 0 or k == col]:
            row.pop(key, None)


def _independent_rows(rows: list[dict[str, Fraction]], columns: Sequence[str]):
    """Greedy rank filter; returns (kept rows, pivot columns of their echelon form)."""
    kept, pivots = [], []
    basis: list[tuple[str, dict[str, Fraction]]] = []
    for row in rows:
        work = dict(row)
        for col, brow in basis:
            if work.get(col, 0):
                factor = work[col] / brow[col]
                for key, value in brow.items():
                    work[key] = work.get(key, Fraction(0)) - factor * value
        scale = _row_scale(row)
        lead = next((c for c in columns if _nonzero(work.get(c, Fraction(0)), scale)), None)
        if lead is None:
            continue
        kept.append(row)
        basis.append((lead, work))
        pivots.append(lead)
    return kept, pivots


def _integer_row(row: Mapping[str, Fraction], order: Sequence[str]) -> dict[str, Fraction]:
    from math import gcd, lcm

    denominators = lcm(*(v.denominator for v in row.values()))
    scaled = {k: v * denominators for k, v in row.items()}
    common = 0
    for v in scaled.values():
        common = gcd(common, int(v))
    first = next(k for k in order if k in scaled)
    sign = -1 if scaled[first] < 0 else 1
    return {k: v * sign / common for k, v in scaled.items()}


def derive_coupling_constraints(
    circuit: Circuit, config: Mapping[str, bool], report: TopologyReport
) -> tuple[list[dict[str, Fraction]], list[str], dict[str, tuple[str, int]], dict]:
    """Pure inductor-current relations implied by the transformers.

    Returns ``(rows, demoted, partner, substitutions)``: integer-scaled rows over
    inductor names (constraints on ``iL``, emitted later on ``iLd``), the F
    inductors they demote to FNF, NF -> (F, sign), and coil -> (F, sign).
    Elimination runs over exact fractions of the decimal turn counts.
    """
    live = [L.name for L in circuit.inductors if report.path_flags[L.name]]
    coils = [c.name for c in circuit.coils]
    classes = series_classes(circuit, config, live + coils)
    inductor_set = set(live)

    partner: dict[str, tuple[str, int]] = {}
    substitutions: dict[str, tuple[str, int]] = {}
    rows: list[dict[str, Fraction]] = []
    for xfmr in circuit.transformers:
        rows.append({("c", c.name): Fraction(str(c.turns)) for c in xfmr.coils})
    for members in classes:
        inds = [(n, s) for n, s in members if n in inductor_set]
        coil_members = [(n, s) for n, s in members if n not in inductor_set]
        if inds:
            first, first_sign = inds[0]
            for name, sign in inds[1:]:
                partner[name] = (first, sign * first_sign)
            for name, sign in coil_members:
                relation = sign * first_sign
                substitutions[name] = (first, relation)
                rows.append({("c", name): Fraction(1), ("L", first): Fraction(-relation)})
        elif len(coil_members) > 1:
            lead, lead_sign = coil_members[0]
            for name, sign in coil_members[1:]:
                rows.append({("c", name): Fraction(1), ("c", lead): Fraction(-sign * lead_sign)})

    used: list[int] = []
    for coil in coils:
        col = ("c", coil)
        options = [
            k for k, row in enumerate(rows)
            if k not in used and _nonzero(row.get(col, Fraction(0)), _row_scale(row))
        ]
        if not options:
            continue
        best = min(options, key=lambda k: (sum(1 for key in rows[k] if key[0] == "c"), k))
        used.append(best)
        _eliminate(rows, rows[best], col)

    pure = []
    for k, row in enumerate(rows):
        if k in used:
            continue
        scale = _row_scale(row)
        cleaned = {key[1]: v for key, v in row.items() if _nonzero(v, scale)}
        if cleaned and all(name in inductor_set for name in cleaned):
            pure.append(cleaned)

    reverse = list(reversed(live))
    kept, _ = _independent_rows(pure, live)
    _, demoted = _independent_rows(kept, reverse)
    kept = [_integer_row(row, live) for row in kept]
    return kept, demoted, partner, substitutions


def derive_cutset_constraints(
    circuit: Circuit, config: Mapping[str, bool], branches: BranchAssignment
) -> list[dict[str, Fraction]]:
    """Every linear relation among inductor currents implied by KCL and the transformers.

    Builds KCL, coil terminal, ampere-turn and inductor link rows, then
    eliminates all branch and coil currents.  What is left spans the relations
    that hold whatever the other elements do, i.e. inductor-only cutsets.
    """
    rows: list[dict] = []
    for node, terms in _kcl_terms(circuit, config, branches).items():
        if node in branches.merged_nodes or not terms:
            continue
        row = {}
        for name, coef in terms.items():
            if name.startswith("I"):
                row[("x", name)] = Fraction(int(coef))
            else:
                row[("x", name)] = Fraction(1)
        rows.append(row)
    for xfmr in circuit.transformers:
        rows.append({("x", f"ip({c.name})"): Fraction(str(c.turns)) for c in xfmr.coils})
        for coil in xfmr.coils:
            rows.append({("x", f"ip({coil.name})"): Fraction(1), ("x", f"in({coil.name})"): Fraction(1)})
    for inductor in circuit.inductors:
        chain, sign = branches.of[inductor.name]
        rows.append({("L", inductor.name): Fraction(1), ("x", i_branch(chain)): Fraction(-sign)})

    columns = sorted({key for row in rows for key in row if key[0] == "x"})
    used: set[int] = set()
    for col in columns:
        pivot = next((k for k, row in enumerate(rows) if k not in used and row.get(col, 0) != 0), None)
        if pivot is None:
            continue
        used.add(pivot)
        _eliminate(rows, rows[pivot], col)
    pure = []
    for k, row in enumerate(rows):
        if k in used:
            continue
        cleaned = {key[1]: v for key, v in row.items() if v != 0}
        if cleaned:
            pure.append(cleaned)
    names = [L.name for L in circuit.inductors]
    kept, _ = _independent_rows(pure, names)
    return [_integer_row(row, names) for row in kept]


def classify_inductors(
    circuit: Circuit,
    config: Mapping[str, bool],
    report: TopologyReport,
    branches: BranchAssignment | None = None,
) -> InductorClass:
    """FF/FNF/NF/pathless classes from series sets and transformer coupling.

    Relations found by the series and coupling steps come first.  Any further
    inductor-only cutset relation (for example one inductor feeding two in
    parallel) is added afterwards and demotes the latest remaining FF inductor.
    """
    if branches is None:
        branches = assign_branch_currents(circuit, config)
    rows, demoted, partner, substitutions = derive_coupling_constraints(circuit, config, report)
    kind: dict[str, str] = {}
    for inductor in circuit.inductors:
        name = inductor.name
        if not report.path_flags[name]:
            kind[name] = "pathless"
        elif name in partner:
            kind[name] = "NF"
        elif name in demoted:
            kind[name] = "FNF"
        else:
            kind[name] = "FF"

    # Completion against the full cutset space.
    names = [L.name for L in circuit.inductors]
    known = [{n: Fraction(1)} for n in names if kind[n] == "pathless"]
    known += [{n: Fraction(1), f: Fraction(-s)} for n, (f, s) in partner.items()]
    known += [dict(r) for r in rows]
    free = [n for n in reversed(names) if kind[n] == "FF"]
    order = [n for n in reversed(names) if kind[n] != "FF"] + free
    base, _ = _independent_rows(known, order)
    extra = []
    for row in derive_cutset_constraints(circuit, config, branches):
        kept, pivots = _independent_rows(base + [row], order)
        if len(kept) > len(base):
            base = kept
            kind[pivots[-1]] = "FNF"
            order = [n for n in reversed(names) if kind[n] != "FF"] + \
                [n for n in reversed(names) if kind[n] == "FF"]
            extra.append(row)
    return InductorClass(kind, partner, tuple(rows), substitutions, tuple(extra))


def emit_inductor_ctd(
    circuit: Circuit, classes: InductorClass, branches: BranchAssignment
) -> list[Equation]:
    rows = []
    for inductor in circuit.inductors:
        name = inductor.name
        link = _merge({f"iL({name})": 1.0}, branches.term(name, -1.0))
        if classes.kind[name] == "FF":
            rows.append(Equation("ES", f"{name} iL=iL^(n+1)", {f"iL({name})": 1.0},
                                 binding=("inductor", name)))
            rows.append(Equation("BranchAssign", f"{name} current", link))
            continue
        rows.append(Equation("ES", f"{name} current", link))
        if classes.kind[name] == "NF":
            first, sign = classes.partner[name]
            rows.append(Equation("InductorCTD", f"{name} follows {first}",
                                 {f"iLd({name})": 1.0, f"iLd({first})": -float(sign)}))
        elif classes.kind[name] == "pathless":
            rows.append(Equation("InductorCTD", f"{name} no conduction path",
                                 {f"iLd({name})": 1.0}))
    for label, group in (("coupling", classes.coupling_rows), ("cutset", classes.cutset_rows)):
        for k, row in enumerate(group):
            rows.append(Equation("InductorCTD", f"{label} {k + 1}",
                                 {f"iLd({n})": float(v) for n, v in row.items()}))
    return rows


# --- assembly --------------------------------------------------------------------


def assemble(
    circuit: Circuit,
    config: Mapping[str, bool],
    svd_priority: Sequence[str] = (),
    report: TopologyReport | None = None,
) -> EquationSystem:
    if not isinstance(config, SwitchConfig):
        config = SwitchConfig(circuit, config)
    if report is None:
        report = analyze(circuit, config, svd_priority)
    branches = assign_branch_currents(circuit, config)
    variables = build_variables(circuit, branches)
    classes = classify_inductors(circuit, config, report)
    equations = (
        stamp_element_equations(circuit, config, branches)
        + emit_kcl(circuit, config, report, branches)
        + emit_switch_ctd(circuit, config, report, branches)
        + emit_inductor_ctd(circuit, classes, branches)
    )
    if len(equations) != len(variables):
        counts = {t: sum(1 for e in equations if e.tag == t) for t in TAGS}
        raise NonSquareSystem(len(equations), len(variables), counts)
    return EquationSystem(circuit, config, variables, equations, report, branches, classes)
