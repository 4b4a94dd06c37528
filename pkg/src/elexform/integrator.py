"""Fixed-step Forward Euler simulation over a switch control schedule."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .formulation import EquationSystem, FormulationError, assemble
from .netlist import Circuit, ControlSchedule, CurrentSource, Inductor, Netlist, Resistor, \
    Switch, SwitchConfig, Tran, VoltageSource
from .solver import ConfigCache, FactorizedSystem, factorize

log = logging.getLogger(__name__)

# Breakpoints within this fraction of a step below a grid point snap onto it.
SNAP = 1e-9
CURRENT_JUMP_TOL = 1e-9


class SimulationError(RuntimeError):
    def __init__(self, t: float, cause: Exception):
        self.t, self.cause = t, cause
        super().__init__(f"at t={t:.12g}: {cause}")


@dataclass(frozen=True)
class Event:
    t: float
    kind: str  # config | reset | jump | projection
    message: str


@dataclass
class Waveforms:
    time: np.ndarray
    signals: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.signals[canonical_signal(name)]

    def to_csv(self, names: Sequence[str] | None = None) -> str:
        names = list(self.signals) if names is None else [canonical_signal(n) for n in names]
        lines = [",".join(["time"] + names)]
        columns = [self.time] + [self.signals[n] for n in names]
        for row in zip(*columns):
            lines.append(",".join(f"{x:.12g}" for x in row))
        return "\n".join(lines) + "\n"


@dataclass
class SimResult:
    waveforms: Waveforms
    events: list[Event]
    factorizations: int
    configs: list[str] = field(default_factory=list)


@dataclass
class SimState:
    """Histories carried between steps."""

    step: int
    dt: float
    config: SwitchConfig
    active: FactorizedSystem
    il: dict[str, float]
    vl: dict[str, float]
    solution: np.ndarray

    @property
    def t(self) -> float:
        return self.step * self.dt


# --- signals ----------------------------------------------------------------


def canonical_signal(name: str) -> str:
    """``iS(S1)`` and ``iL(L1)`` are aliases of ``I(S1)`` and ``I(L1)``."""
    name = name.strip()
    for alias in ("iS(", "iL("):
        if name.startswith(alias):
            return "I(" + name[len(alias):]
    return name


def default_signals(circuit: Circuit) -> list[str]:
    names = [f"V({n})" for n in circuit.signal_nodes]
    names += [f"I({e.name})" for e in circuit.elements
              if isinstance(e, (Resistor, VoltageSource, CurrentSource, Switch, Inductor))]
    return names


def validate_signals(circuit: Circuit, names: Sequence[str]) -> list[str]:
    valid = set(default_signals(circuit)) | {f"I({c.name})" for c in circuit.coils}
    out = []
    for name in names:
        canonical = canonical_signal(name)
        if canonical not in valid:
            raise ValueError(f"unknown signal {name!r}")
        out.append(canonical)
    return out


def signal_values(system: EquationSystem, x: np.ndarray, names: Sequence[str]) -> list[float]:
    circuit, index = system.circuit, system.variables
    out = []
    for name in names:
        kind, arg = name[0], name[2:-1]
        if kind == "V":
            out.append(0.0 if arg == circuit.reference else float(x[index[f"V({arg})"]]))
            continue
        element = circuit.branch(arg)
        if isinstance(element, Switch):
            out.append(float(x[index[f"iS({arg})"]]))
        elif isinstance(element, Inductor):
            out.append(float(x[index[f"iL({arg})"]]))
        elif arg in system.branches.of:
            chain, sign = system.branches.of[arg]
            out.append(sign * float(x[index[f"I{chain}"]]))
        else:
            out.append(float(x[index[f"ip({arg})"]]))
    return out


# --- stepping ----------------------------------------------------------------


def fe_update(state: SimState, inductors: Sequence[Inductor]) -> dict[str, float]:
    """``i^(n+1) = i^(n) + dt/L * (Vp^(n) - Vn^(n))`` for every inductor."""
    return {L.name: state.il[L.name] + state.dt / L.inductance * state.vl[L.name] for L in inductors}


def _inductor_readout(system: EquationSystem, x: np.ndarray) -> tuple[dict, dict]:
    index = system.variables
    il, vl = {}, {}
    for L in system.circuit.inductors:
        il[L.name] = float(x[index[f"iL({L.name})"]])
        vl[L.name] = L.inductance * float(x[index[f"iLd({L.name})"]])
    return il, vl


class Simulator:
    """Owns the configuration cache and advances a SimState."""

    def __init__(self, circuit: Circuit, schedule: ControlSchedule, dt: float,
                 cache_size: int = 64, svd_priority: Sequence[str] = ()):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.circuit = circuit
        self.schedule = schedule
        self.dt = dt
        self.svd_priority = tuple(svd_priority)
        self.cache = ConfigCache(self._build, cache_size)
        self.events: list[Event] = []

    def _build(self, mask: int) -> FactorizedSystem:
        config = SwitchConfig.from_mask(self.circuit, mask)
        return factorize(assemble(self.circuit, config, self.svd_priority))

    def config_at(self, step: int) -> SwitchConfig:
        t = step * self.dt + SNAP * self.dt
        return SwitchConfig(self.circuit, self.schedule.config_at(self.circuit, t))

    def _system(self, step: int, config: SwitchConfig) -> FactorizedSystem:
        try:
            return self.cache.get(config.mask)
        except FormulationError as exc:
            raise SimulationError(step * self.dt, exc) from exc

    def start(self) -> SimState:
        config = self.config_at(0)
        active = self._system(0, config)
        ic = {L.name: L.ic for L in self.circuit.inductors}
        x = active.solve(active.system.rhs(0.0, ic))
        il, vl = _inductor_readout(active.system, x)
        self.events.append(Event(0.0, "config", config.to_text() or "(no switches)"))
        for name, kind in active.system.inductors.kind.items():
            if kind != "FF" and abs(il[name] - ic[name]) > CURRENT_JUMP_TOL * max(1.0, abs(ic[name])):
                message = f"{name} ({kind}) initial current {ic[name]:.6g} projected to {il[name]:.6g}"
                log.warning(message)
                self.events.append(Event(0.0, "projection", message))
        return SimState(0, self.dt, config, active, il, vl, x)

    def step(self, state: SimState) -> SimState:
        step = state.step + 1
        t = step * self.dt
        predicted = fe_update(state, self.circuit.inductors)
        config = self.config_at(step)
        active = state.active
        if config != state.config:
            active = self._system(step, config)
            self.events.append(Event(t, "config", config.to_text()))
            for name, kind in active.system.inductors.kind.items():
                if kind == "pathless" and predicted[name] != 0.0:
                    self.events.append(Event(
                        t, "reset", f"{name} has no conduction path; current {predicted[name]:.6g} reset to 0"))
                    predicted[name] = 0.0
        x = active.solve(active.system.rhs(t, predicted))
        il, vl = _inductor_readout(active.system, x)
        if config != state.config:
            for name, kind in active.system.inductors.kind.items():
                if kind in ("NF", "FNF") and abs(il[name] - predicted[name]) > \
                        CURRENT_JUMP_TOL * max(1.0, abs(predicted[name])):
                    self.events.append(Event(
                        t, "jump", f"{name} ({kind}) current {predicted[name]:.6g} -> {il[name]:.6g}"))
        return SimState(step, self.dt, config, active, il, vl, x)


def simulate(
    circuit: Circuit,
    schedule: ControlSchedule,
    tran: Tran,
    signals: Sequence[str] | None = None,
    cache_size: int = 64,
    svd_priority: Sequence[str] = (),
) -> SimResult:
    names = default_signals(circuit) if signals is None else validate_signals(circuit, signals)
    n_steps = math.floor(tran.tstop / tran.dt + SNAP)
    sim = Simulator(circuit, schedule, tran.dt, cache_size, svd_priority)
    data = np.empty((n_steps + 1, len(names)))
    state = sim.start()
    data[0] = signal_values(state.active.system, state.solution, names)
    for k in range(1, n_steps + 1):
        state = sim.step(state)
        data[k] = signal_values(state.active.system, state.solution, names)
    time = np.arange(n_steps + 1) * tran.dt
    waveforms = Waveforms(time, {n: data[:, j] for j, n in enumerate(names)})
    configs = [e.message for e in sim.events if e.kind == "config"]
    return SimResult(waveforms, sim.events, sim.cache.factorizations, configs)


def simulate_netlist(netlist: Netlist, **kwargs) -> SimResult:
    if netlist.tran is None:
        raise ValueError("netlist has no .tran directive")
    return simulate(netlist.circuit, netlist.schedule, netlist.tran, **kwargs)


def solve_static(circuit: Circuit, config: Mapping[str, bool], t: float = 0.0,
                 il: Mapping[str, float] | None = None, svd_priority: Sequence[str] = ()):
    """Assemble, factor and solve one configuration; returns (system, x)."""
    system = assemble(circuit, config, svd_priority)
    currents = {L.name: L.ic for L in circuit.inductors}
    currents.update(il or {})
    x = factorize(system).solve(system.rhs(t, currents))
    return system, x
