"""Netlist grammar, circuit data model and switch control schedules.

Grammar (one statement per line, ``#`` starts a comment)::

    R<name> <p> <n> <ohms>
    V<name> <p> <n> dc <volts> | sin <amp> <freq_hz> [phase_deg]
    I<name> <p> <n> dc <amps>  | sin <amp> <freq_hz> [phase_deg]
    S<name> <p> <n> von=<volts> ctl=<signal>
    L<name> <p> <n> <henries> [ic=<amps>]
    X<name> pri <pp> <pn> <Np> sec <sp> <sn> <Ns> [sec ...]
    .ctl <signal> <t0>:<on|off> [<t1>:<on|off> ...]
    .tran <dt_seconds> <tstop_seconds>

Branch currents are positive from ``p`` to ``n`` through the element.  A
current source pushes its value through itself from ``p`` to ``n``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Union

REFERENCE = "0"

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


class NetlistError(ValueError):
    """Raised for malformed or inconsistent netlists."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# --- waveforms ---------------------------------------------------------------


@dataclass(frozen=True)
class Dc:
    value: float

    def __call__(self, t: float) -> float:
        return self.value

    def to_text(self) -> str:
        return f"dc {_fmt(self.value)}"


@dataclass(frozen=True)
class Sine:
    amplitude: float
    frequency: float
    phase_deg: float = 0.0

    def __call__(self, t: float) -> float:
        return self.amplitude * math.sin(
            2.0 * math.pi * self.frequency * t + math.radians(self.phase_deg)
        )

    def to_text(self) -> str:
        text = f"sin {_fmt(self.amplitude)} {_fmt(self.frequency)}"
        if self.phase_deg:
            text += f" {_fmt(self.phase_deg)}"
        return text


Waveform = Union[Dc, Sine]


# --- elements ----------------------------------------------------------------


@dataclass(frozen=True)
class Resistor:
    name: str
    p: str
    n: str
    resistance: float

    @property
    def nodes(self) -> tuple[str, str]:
        return (self.p, self.n)


@dataclass(frozen=True)
class VoltageSource:
    name: str
    p: str
    n: str
    waveform: Waveform

    @property
    def nodes(self) -> tuple[str, str]:
        return (self.p, self.n)


@dataclass(frozen=True)
class CurrentSource:
    name: str
    p: str
    n: str
    waveform: Waveform

    @property
    def nodes(self) -> tuple[str, str]:
        return (self.p, self.n)


@dataclass(frozen=True)
class Switch:
    name: str
    p: str
    n: str
    v_on: float
    control: str

    @property
    def nodes(self) -> tuple[str, str]:
        return (self.p, self.n)


@dataclass(frozen=True)
class Inductor:
    name: str
    p: str
    n: str
    inductance: float
    ic: float = 0.0

    @property
    def nodes(self) -> tuple[str, str]:
        return (self.p, self.n)


@dataclass(frozen=True)
class Coil:
    """One winding of a transformer, addressed as ``<transformer>.<label>``."""

    transformer: str
    label: str
    p: str
    n: str
    turns: float

    @property
    def name(self) -> str:
        return f"{self.transformer}.{self.label}"

    @property
    def nodes(self) -> tuple[str, str]:
        return (self.p, self.n)


@dataclass(frozen=True)
class Transformer:
    name: str
    coils: tuple[Coil, ...]

    @property
    def primary(self) -> Coil:
        return self.coils[0]

    @property
    def secondaries(self) -> tuple[Coil, ...]:
        return self.coils[1:]

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(node for coil in self.coils for node in coil.nodes)


TwoTerminal = Union[Resistor, VoltageSource, CurrentSource, Switch, Inductor]
Element = Union[Resistor, VoltageSource, CurrentSource, Switch, Inductor, Transformer]
# Anything with exactly two terminals that topology algorithms treat as an edge.
Branch = Union[Resistor, VoltageSource, CurrentSource, Switch, Inductor, Coil]


@dataclass(frozen=True)
class Circuit:
    """Validated, immutable circuit.  Node and element order follow the netlist."""

    elements: tuple[Element, ...]
    nodes: tuple[str, ...]
    reference: str = REFERENCE
    _by_name: Mapping[str, Element] = field(default=None, repr=False, compare=False)
    _branches: tuple[Branch, ...] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_name", {e.name: e for e in self.elements})
        branches: list[Branch] = []
        for element in self.elements:
            if isinstance(element, Transformer):
                branches.extend(element.coils)
            else:
                branches.append(element)
        object.__setattr__(self, "_branches", tuple(branches))

    def __getitem__(self, name: str) -> Element:
        return self._by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    @property
    def branches(self) -> tuple[Branch, ...]:
        """Two-terminal view: elements in order, transformers expanded into coils."""
        return self._branches

    def branch(self, name: str) -> Branch:
        for branch in self._branches:
            if branch.name == name:
                return branch
        raise KeyError(name)

    def _of_type(self, kind) -> tuple:
        return tuple(e for e in self.elements if isinstance(e, kind))

    @property
    def switches(self) -> tuple[Switch, ...]:
        return self._of_type(Switch)

    @property
    def inductors(self) -> tuple[Inductor, ...]:
        return self._of_type(Inductor)

    @property
    def transformers(self) -> tuple[Transformer, ...]:
        return self._of_type(Transformer)

    @property
    def coils(self) -> tuple[Coil, ...]:
        return tuple(c for x in self.transformers for c in x.coils)

    @property
    def signal_nodes(self) -> tuple[str, ...]:
        """Non-reference nodes, in netlist order."""
        return tuple(n for n in self.nodes if n != self.reference)


# --- control schedule ----------------------------------------------------------


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant on/off breakpoints per control signal."""

    signals: Mapping[str, tuple[tuple[float, bool], ...]] = field(default_factory=dict)

    def state(self, signal: str, t: float) -> bool:
        points = self.signals[signal]
        state = points[0][1]
        for time, value in points:
            if time <= t:
                state = value
            else:
                break
        return state

    def breakpoints(self) -> list[float]:
        return sorted({t for points in self.signals.values() for t, _ in points})

    def config_at(self, circuit: Circuit, t: float) -> dict[str, bool]:
        return {s.name: self.state(s.control, t) for s in circuit.switches}


@dataclass(frozen=True)
class Tran:
    dt: float
    tstop: float


@dataclass(frozen=True)
class Netlist:
    circuit: Circuit
    schedule: ControlSchedule
    tran: Tran | None = None


# --- parsing -----------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def _number(token: str, line: int, what: str) -> float:
    if not _NUMBER.match(token):
        raise NetlistError(f"invalid number {token!r} for {what}", line)
    return float(token)


def _keyword(token: str, key: str, line: int) -> str:
    prefix = key + "="
    if not token.lower().startswith(prefix):
        raise NetlistError(f"expected {prefix}<value>, got {token!r}", line)
    return token[len(prefix):]


def _positive(value: float, what: str, line: int) -> float:
    if not value > 0:
        raise NetlistError(f"{what} must be positive, got {value!r}", line)
    return value


def _waveform(tokens: list[str], line: int) -> Waveform:
    if not tokens:
        raise NetlistError("missing source waveform", line)
    kind = tokens[0].lower()
    if kind == "dc" and len(tokens) == 2:
        return Dc(_number(tokens[1], line, "dc value"))
    if kind == "sin" and len(tokens) in (3, 4):
        amp = _number(tokens[1], line, "amplitude")
        freq = _number(tokens[2], line, "frequency")
        phase = _number(tokens[3], line, "phase") if len(tokens) == 4 else 0.0
        return Sine(amp, freq, phase)
    raise NetlistError(f"bad waveform {' '.join(tokens)!r}", line)


def _two_nodes(tokens: list[str], line: int) -> tuple[str, str]:
    if len(tokens) < 3:
        raise NetlistError("expected <name> <p> <n> ...", line)
    p, n = tokens[1], tokens[2]
    if p == n:
        raise NetlistError(f"element {tokens[0]} has both terminals on node {p}", line)
    return p, n


def _parse_transformer(tokens: list[str], line: int) -> Transformer:
    name = tokens[0]
    rest = tokens[1:]
    groups: list[tuple[str, list[str]]] = []
    while rest:
        head = rest[0].lower()
        if head not in ("pri", "sec") or len(rest) < 4:
            raise NetlistError(f"bad coil group in transformer {name}", line)
        groups.append((head, rest[1:4]))
        rest = rest[4:]
    if not groups or groups[0][0] != "pri" or any(h != "sec" for h, _ in groups[1:]):
        raise NetlistError(f"transformer {name} needs one 'pri' group then 'sec' groups", line)
    if len(groups) < 2:
        raise NetlistError(f"transformer {name} has no secondary coil", line)
    n_sec = len(groups) - 1
    coils = []
    for index, (_, (p, n, turns)) in enumerate(groups):
        if p == n:
            raise NetlistError(f"coil of {name} has both terminals on node {p}", line)
        if index == 0:
            label = "p"
        else:
            label = "s" if n_sec == 1 else f"s{index}"
        t = _positive(_number(turns, line, "turns"), "turn count", line)
        coils.append(Coil(name, label, p, n, t))
    return Transformer(name, tuple(coils))


def _parse_element(tokens: list[str], line: int) -> Element:
    name = tokens[0]
    kind = name[0].upper()
    if kind == "X":
        return _parse_transformer(tokens, line)
    p, n = _two_nodes(tokens, line)
    args = tokens[3:]
    if kind == "R":
        if len(args) != 1:
            raise NetlistError("expected R<name> <p> <n> <ohms>", line)
        return Resistor(name, p, n, _positive(_number(args[0], line, "resistance"), "resistance", line))
    if kind == "V":
        return VoltageSource(name, p, n, _waveform(args, line))
    if kind == "I":
        return CurrentSource(name, p, n, _waveform(args, line))
    if kind == "S":
        if len(args) != 2:
            raise NetlistError("expected S<name> <p> <n> von=<volts> ctl=<signal>", line)
        v_on = _number(_keyword(args[0], "von", line), line, "von")
        if v_on < 0:
            raise NetlistError(f"von must be >= 0, got {v_on!r}", line)
        control = _keyword(args[1], "ctl", line)
        if not control:
            raise NetlistError("empty control signal name", line)
        return Switch(name, p, n, v_on, control)
    if kind == "L":
        if len(args) not in (1, 2):
            raise NetlistError("expected L<name> <p> <n> <henries> [ic=<amps>]", line)
        value = _positive(_number(args[0], line, "inductance"), "inductance", line)
        ic = _number(_keyword(args[1], "ic", line), line, "ic") if len(args) == 2 else 0.0
        return Inductor(name, p, n, value, ic)
    raise NetlistError(f"unknown element type {name!r}", line)


def _parse_ctl(tokens: list[str], line: int) -> tuple[str, tuple[tuple[float, bool], ...]]:
    if len(tokens) < 3:
        raise NetlistError("expected .ctl <signal> <t>:<on|off> ...", line)
    points = []
    for token in tokens[2:]:
        time, sep, state = token.partition(":")
        if not sep or state.lower() not in ("on", "off"):
            raise NetlistError(f"bad breakpoint {token!r}", line)
        points.append((_number(time, line, "breakpoint time"), state.lower() == "on"))
    times = [t for t, _ in points]
    if times[0] != 0.0:
        raise NetlistError(f"signal {tokens[1]} must define its state at t=0", line)
    if any(b <= a for a, b in zip(times, times[1:])):
        raise NetlistError(f"breakpoints of {tokens[1]} must be strictly increasing", line)
    return tokens[1], tuple(points)


def parse_netlist(text: str) -> Netlist:
    elements: list[Element] = []
    names: dict[str, int] = {}
    signals: dict[str, tuple[tuple[float, bool], ...]] = {}
    tran: Tran | None = None
    last_line = 0
    for number, raw in enumerate(text.splitlines(), start=1):
        last_line = number
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        tokens = body.split()
        head = tokens[0]
        if head.startswith("."):
            directive = head.lower()
            if directive == ".ctl":
                signal, points = _parse_ctl(tokens, number)
                if signal in signals:
                    raise NetlistError(f"duplicate .ctl for signal {signal}", number)
                signals[signal] = points
            elif directive == ".tran":
                if len(tokens) != 3 or tran is not None:
                    raise NetlistError("expected a single .tran <dt> <tstop>", number)
                dt = _positive(_number(tokens[1], number, "dt"), "dt", number)
                tstop = _positive(_number(tokens[2], number, "tstop"), "tstop", number)
                tran = Tran(dt, tstop)
            else:
                raise NetlistError(f"unknown directive {head!r}", number)
            continue
        element = _parse_element(tokens, number)
        if element.name in names:
            raise NetlistError(
                f"duplicate element name {element.name} (first defined on line {names[element.name]})",
                number,
            )
        names[element.name] = number
        elements.append(element)

    circuit = _build_circuit(elements, last_line)
    for switch in circuit.switches:
        if switch.control not in signals:
            raise NetlistError(f"switch {switch.name} uses undefined control signal {switch.control}")
    return Netlist(circuit, ControlSchedule(signals), tran)


def _build_circuit(elements: list[Element], last_line: int) -> Circuit:
    if not elements:
        raise NetlistError("netlist has no elements", last_line)
    nodes: list[str] = []
    seen = set()
    for element in elements:
        for node in element.nodes:
            if node not in seen:
                seen.add(node)
                nodes.append(node)
    if REFERENCE not in seen:
        raise NetlistError("missing reference node 0")
    circuit = Circuit(tuple(elements), tuple(nodes))
    _check_grounded(circuit)
    return circuit


def _check_grounded(circuit: Circuit) -> None:
    # Every node must reach 0 through some branch, whatever the switch states.
    adjacency: dict[str, set[str]] = {n: set() for n in circuit.nodes}
    for branch in circuit.branches:
        adjacency[branch.p].add(branch.n)
        adjacency[branch.n].add(branch.p)
    reached = {REFERENCE}
    frontier = [REFERENCE]
    while frontier:
        node = frontier.pop()
        for other in adjacency[node] - reached:
            reached.add(other)
            frontier.append(other)
    floating = [n for n in circuit.nodes if n not in reached]
    if floating:
        raise NetlistError(f"nodes {', '.join(floating)} have no connection to reference node 0")


def read_netlist(path) -> Netlist:
    with open(path, encoding="utf-8") as handle:
        return parse_netlist(handle.read())


# --- serialization -------------------------------------------------------------


def _element_text(element: Element) -> str:
    if isinstance(element, Resistor):
        return f"{element.name} {element.p} {element.n} {_fmt(element.resistance)}"
    if isinstance(element, (VoltageSource, CurrentSource)):
        return f"{element.name} {element.p} {element.n} {element.waveform.to_text()}"
    if isinstance(element, Switch):
        return f"{element.name} {element.p} {element.n} von={_fmt(element.v_on)} ctl={element.control}"
    if isinstance(element, Inductor):
        text = f"{element.name} {element.p} {element.n} {_fmt(element.inductance)}"
        if element.ic:
            text += f" ic={_fmt(element.ic)}"
        return text
    parts = [element.name]
    for index, coil in enumerate(element.coils):
        parts += ["pri" if index == 0 else "sec", coil.p, coil.n, _fmt(coil.turns)]
    return " ".join(parts)


def serialize(netlist: Netlist) -> str:
    """Canonical text form; ``parse_netlist(serialize(x)) == x``."""
    lines = [_element_text(e) for e in netlist.circuit.elements]
    for signal, points in netlist.schedule.signals.items():
        steps = " ".join(f"{_fmt(t)}:{'on' if on else 'off'}" for t, on in points)
        lines.append(f".ctl {signal} {steps}")
    if netlist.tran is not None:
        lines.append(f".tran {_fmt(netlist.tran.dt)} {_fmt(netlist.tran.tstop)}")
    return "\n".join(lines) + "\n"


# --- switch configurations -------------------------------------------------------


class SwitchConfig(Mapping[str, bool]):
    """On/off state (``True`` = on) for every switch of a circuit."""

    def __init__(self, circuit: Circuit, states: Mapping[str, bool]):
        names = tuple(s.name for s in circuit.switches)
        missing = [n for n in names if n not in states]
        extra = [n for n in states if n not in names]
        if missing or extra:
            raise ValueError(f"switch config mismatch: missing {missing}, unknown {extra}")
        self._names = names
        self._states = {n: bool(states[n]) for n in names}

    @classmethod
    def parse(cls, circuit: Circuit, text: str, default: Mapping[str, bool] | None = None) -> "SwitchConfig":
        states = dict(default or {})
        for item in filter(None, (s.strip() for s in text.split(","))):
            name, sep, value = item.partition("=")
            if not sep or value.lower() not in ("on", "off"):
                raise ValueError(f"bad switch setting {item!r}, expected NAME=on|off")
            states[name.strip()] = value.lower() == "on"
        return cls(circuit, states)

    @classmethod
    def all_on(cls, circuit: Circuit) -> "SwitchConfig":
        return cls(circuit, {s.name: True for s in circuit.switches})

    @classmethod
    def from_mask(cls, circuit: Circuit, mask: int) -> "SwitchConfig":
        return cls(circuit, {s.name: bool(mask >> k & 1) for k, s in enumerate(circuit.switches)})

    @classmethod
    def every(cls, circuit: Circuit) -> Iterator["SwitchConfig"]:
        for mask in range(2 ** len(circuit.switches)):
            yield cls.from_mask(circuit, mask)

    @property
    def mask(self) -> int:
        return sum(1 << k for k, n in enumerate(self._names) if self._states[n])

    def __getitem__(self, name: str) -> bool:
        return self._states[name]

    def __iter__(self):
        return iter(self._names)

    def __len__(self) -> int:
        return len(self._names)

    def __hash__(self):
        return hash((self._names, self.mask))

    def __eq__(self, other):
        if isinstance(other, SwitchConfig):
            return self._names == other._names and self.mask == other.mask
        return NotImplemented

    def __repr__(self):
        return f"SwitchConfig({self.to_text()})"

    def to_text(self) -> str:
        return ",".join(f"{n}={'on' if self._states[n] else 'off'}" for n in self._names)
