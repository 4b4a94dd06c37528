"""Reference simulator: switches as finite resistors, Backward Euler stepping.

This is a plain modified nodal analysis and shares no assembly code with the
ideal-switch engine.  Only the ideal transformer uses the same element
relations (voltage ratio and ampere-turn balance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .integrator import SNAP, Waveforms, canonical_signal, default_signals, validate_signals
from .netlist import (
    Circuit,
    ControlSchedule,
    CurrentSource,
    Inductor,
    Resistor,
    Switch,
    Tran,
    Transformer,
    VoltageSource,
)


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleParams:
    r_on: float = 1e-6
    r_off: float = 1e9
    dt: float | None = None

    def __post_init__(self):
        if not (0 < self.r_on < self.r_off):
            raise ValueError("need 0 < r_on < r_off")


@dataclass
class OracleSolution:
    voltages: dict[str, float]
    currents: dict[str, float]

    def value(self, signal: str) -> float:
        signal = canonical_signal(signal)
        table = self.voltages if signal.startswith("V(") else self.currents
        return table[signal[2:-1]]


def _q(x: float) -> Fraction:
    """Exact rational for a parameter, read back from its shortest decimal form."""
    return Fraction(repr(float(x)))


class _ExactLU:
    """LU factorization over fractions; any nonzero pivot is exact."""

    def __init__(self, G: list[list[Fraction]]):
        n = len(G)
        a = [row[:] for row in G]
        perm = list(range(n))
        for k in range(n):
            pivot = next((r for r in range(k, n) if a[r][k] != 0), None)
            if pivot is None:
                raise OracleError(f"singular oracle network (column {k})")
            if pivot != k:
                a[k], a[pivot] = a[pivot], a[k]
                perm[k], perm[pivot] = perm[pivot], perm[k]
            inv = 1 / a[k][k]
            for r in range(k + 1, n):
                if a[r][k] != 0:
                    factor = a[r][k] * inv
                    a[r][k] = factor
                    row_r, row_k = a[r], a[k]
                    for c in range(k + 1, n):
                        if row_k[c] != 0:
                            row_r[c] -= factor * row_k[c]
        self._a, self._perm, self._n = a, perm, n

    def solve(self, b: list[Fraction]) -> list[Fraction]:
        a, n = self._a, self._n
        y = [b[p] for p in self._perm]
        for r in range(n):
            row = a[r]
            y[r] -= sum((row[c] * y[c] for c in range(r) if row[c] != 0), Fraction(0))
        for r in range(n - 1, -1, -1):
            row = a[r]
            y[r] = (y[r] - sum((row[c] * y[c] for c in range(r + 1, n) if row[c] != 0),
                               Fraction(0))) / row[r]
        return y


class _Mna:
    """Node-voltage unknowns plus explicit currents for V sources, inductors and coils.

    Stamps are exact fractions: a floating section is held only by the tiny
    off conductances, which double precision would lose against the on ones.
    """

    def __init__(self, circuit: Circuit):
        self.circuit = circuit
        self.node = {n: k for k, n in enumerate(circuit.signal_nodes)}
        extra = [e.name for e in circuit.elements if isinstance(e, (VoltageSource, Inductor))]
        extra += [c.name for c in circuit.coils]
        offset = len(self.node)
        self.current = {name: offset + k for k, name in enumerate(extra)}
        self.size = offset + len(extra)
        self._factors: dict = {}

    def matrix(self, config: Mapping[str, bool], params: OracleParams, h: float | None):
        """System matrix; ``h`` is the BE step, or None for a dc solve."""
        n = self.size
        G = [[Fraction(0)] * n for _ in range(n)]
        for element in self.circuit.elements:
            if isinstance(element, Resistor):
                self._conductance(G, element.p, element.n, 1 / _q(element.resistance))
            elif isinstance(element, Switch):
                r = params.r_on if config[element.name] else params.r_off
                self._conductance(G, element.p, element.n, 1 / _q(r))
            elif isinstance(element, (VoltageSource, Inductor)):
                k = self.current[element.name]
                self._incidence(G, element.p, element.n, k)
                self._voltage(G, k, element.p, element.n, Fraction(1))
                if isinstance(element, Inductor) and h is not None:
                    G[k][k] = -_q(element.inductance) / _q(h)
            elif isinstance(element, Transformer):
                primary = element.primary
                kp = self.current[primary.name]
                for coil in element.coils:
                    self._incidence(G, coil.p, coil.n, self.current[coil.name])
                # Coil current rows hold the voltage ratios, the primary row the ampere-turns.
                for coil in element.secondaries:
                    k = self.current[coil.name]
                    self._voltage(G, k, primary.p, primary.n, _q(coil.turns))
                    self._voltage(G, k, coil.p, coil.n, -_q(primary.turns))
                for coil in element.coils:
                    G[kp][self.current[coil.name]] = _q(coil.turns)
        return G

    def _conductance(self, G, p, n, g):
        for a, sa in ((p, 1), (n, -1)):
            if a not in self.node:
                continue
            for b, sb in ((p, 1), (n, -1)):
                if b in self.node:
                    G[self.node[a]][self.node[b]] += sa * sb * g

    def _incidence(self, G, p, n, k):
        if p in self.node:
            G[self.node[p]][k] += 1
        if n in self.node:
            G[self.node[n]][k] -= 1

    def _voltage(self, G, row, p, n, scale):
        if p in self.node:
            G[row][self.node[p]] += scale
        if n in self.node:
            G[row][self.node[n]] -= scale

    def rhs(self, config, params, t, h, i_prev):
        b = [Fraction(0)] * self.size
        for element in self.circuit.elements:
            if isinstance(element, VoltageSource):
                b[self.current[element.name]] = Fraction(element.waveform(t))
            elif isinstance(element, CurrentSource):
                value = Fraction(element.waveform(t))
                if element.p in self.node:
                    b[self.node[element.p]] -= value
                if element.n in self.node:
                    b[self.node[element.n]] += value
            elif isinstance(element, Switch) and config[element.name] and element.v_on:
                g = 1 / _q(params.r_on)
                if element.p in self.node:
                    b[self.node[element.p]] += g * _q(element.v_on)
                if element.n in self.node:
                    b[self.node[element.n]] -= g * _q(element.v_on)
            elif isinstance(element, Inductor) and h is not None:
                b[self.current[element.name]] = \
                    -_q(element.inductance) / _q(h) * Fraction(i_prev[element.name])
        return b

    def solve(self, config, params, t, h=None, i_prev=None) -> np.ndarray:
        key = (tuple(sorted(config.items())), h)
        if key not in self._factors:
            self._factors[key] = _ExactLU(self.matrix(config, params, h))
        x = self._factors[key].solve(self.rhs(config, params, t, h, i_prev))
        return np.array([float(v) for v in x])

    def readout(self, x, config, params) -> OracleSolution:
        circuit = self.circuit

        def v(node):
            return 0.0 if node == circuit.reference else float(x[self.node[node]])

        voltages = {n: v(n) for n in circuit.nodes}
        currents = {}
        for element in circuit.elements:
            if isinstance(element, Resistor):
                currents[element.name] = (v(element.p) - v(element.n)) / element.resistance
            elif isinstance(element, Switch):
                on = config[element.name]
                r = params.r_on if on else params.r_off
                drop = v(element.p) - v(element.n) - (element.v_on if on else 0.0)
                currents[element.name] = drop / r
            elif isinstance(element, (VoltageSource, Inductor)):
                currents[element.name] = float(x[self.current[element.name]])
        for coil in circuit.coils:
            currents[coil.name] = float(x[self.current[coil.name]])
        return OracleSolution(voltages, currents)


def _with_sources(solution: OracleSolution, circuit: Circuit, t: float) -> OracleSolution:
    for element in circuit.elements:
        if isinstance(element, CurrentSource):
            solution.currents[element.name] = element.waveform(t)
    return solution


def oracle_dc(circuit: Circuit, config: Mapping[str, bool], params: OracleParams = OracleParams(),
              t: float = 0.0) -> OracleSolution:
    """Resistive solve with inductors as shorts and sources evaluated at ``t``."""
    mna = _Mna(circuit)
    x = mna.solve(config, params, t)
    return _with_sources(mna.readout(x, config, params), circuit, t)


def oracle_tran(circuit: Circuit, schedule: ControlSchedule, tran: Tran,
                params: OracleParams = OracleParams(),
                signals: Sequence[str] | None = None) -> Waveforms:
    """Backward Euler run on the same grid as the engine (``params.dt`` overrides)."""
    dt = params.dt or tran.dt
    if dt > tran.dt * (1 + SNAP):
        raise ValueError("oracle step must not exceed the engine step")
    names = default_signals(circuit) if signals is None else validate_signals(circuit, signals)
    mna = _Mna(circuit)
    n_steps = math.floor(tran.tstop / dt + SNAP)

    def config_at(step):
        return schedule.config_at(circuit, step * dt + SNAP * dt)

    # The t=0 sample is a tiny BE step from the initial currents, so inductor
    # voltages already reflect the network seen by those currents.
    i_prev = {L.name: L.ic for L in circuit.inductors}
    data = np.empty((n_steps + 1, len(names)))
    config = config_at(0)
    x = mna.solve(config, params, 0.0, 1e-3 * dt, i_prev)
    data[0] = _sample(mna, x, config, params, 0.0, names)
    for step in range(1, n_steps + 1):
        t = step * dt
        config = config_at(step)
        x = mna.solve(config, params, t, dt, i_prev)
        i_prev = {L.name: float(x[mna.current[L.name]]) for L in circuit.inductors}
        data[step] = _sample(mna, x, config, params, t, names)
    time = np.arange(n_steps + 1) * dt
    return Waveforms(time, {n: data[:, j] for j, n in enumerate(names)})


def _sample(mna, x, config, params, t, names):
    solution = _with_sources(mna.readout(x, config, params), mna.circuit, t)
    return [solution.value(n) for n in names]
