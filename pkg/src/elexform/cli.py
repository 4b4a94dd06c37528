"""Command-line entry point.

Exit codes: 0 success, 1 parse or I/O error, 2 formulation error (non-square
or singular system), 3 comparison above tolerance.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .formulation import FormulationError, assemble
from .integrator import (
    SimulationError,
    Waveforms,
    default_signals,
    signal_values,
    simulate,
    solve_static,
    validate_signals,
)
from .netlist import NetlistError, SwitchConfig, Tran, read_netlist
from .oracle import OracleError, OracleParams, oracle_dc, oracle_tran
from .topology import analyze

MODES = ("simulate", "oracle", "compare", "dump-topology", "dump-system")


@dataclass(frozen=True)
class RunConfig:
    mode: str
    input: str
    output: str | None
    dt: float | None
    tstop: float | None
    tol: float
    floor: float
    ron: float
    roff: float
    config: str | None
    signals: list[str] | None


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elexform",
        description="Ideal-switch circuit equation builder and Forward Euler simulator.",
        epilog="Switch breakpoints take effect at the first grid point t_k >= breakpoint.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("input", help="netlist file")
        p.add_argument("-o", "--output", help="write to this file instead of stdout")
        p.add_argument("--config", help="switch states for static modes, e.g. S1=on,S2=off")
        if mode in ("simulate", "oracle", "compare"):
            p.add_argument("--dt", type=_positive, help="override the .tran step")
            p.add_argument("--tstop", type=_positive, help="override the .tran stop time")
            p.add_argument("--signals", help="comma-separated list, e.g. V(A),I(L1)")
            p.add_argument("--ron", type=_positive, default=1e-6, help="oracle on resistance")
            p.add_argument("--roff", type=_positive, default=1e9, help="oracle off resistance")
        if mode == "simulate":
            p.add_argument("--oracle", action="store_true", help="run the reference simulator")
        if mode == "compare":
            p.add_argument("--tol", type=_positive, default=1e-4, help="max relative error")
            p.add_argument("--floor", type=_positive, default=1.0,
                           help="smallest scale (V or A) that errors are taken relative to")
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    mode = "oracle" if getattr(args, "oracle", False) else args.mode
    signals = None
    if getattr(args, "signals", None):
        signals = [s.strip() for s in args.signals.split(",") if s.strip()]
    return RunConfig(
        mode=mode,
        input=args.input,
        output=args.output,
        dt=getattr(args, "dt", None),
        tstop=getattr(args, "tstop", None),
        tol=getattr(args, "tol", 1e-4),
        floor=getattr(args, "floor", 1.0),
        ron=getattr(args, "ron", 1e-6),
        roff=getattr(args, "roff", 1e9),
        config=args.config,
        signals=signals,
    )


def _tran(run: RunConfig, netlist) -> Tran | None:
    base = netlist.tran
    if base is None and (run.dt is None or run.tstop is None):
        return None
    dt = run.dt if run.dt is not None else base.dt
    tstop = run.tstop if run.tstop is not None else base.tstop
    return Tran(dt, tstop)


def _static_config(run: RunConfig, netlist) -> SwitchConfig:
    circuit = netlist.circuit
    default = netlist.schedule.config_at(circuit, 0.0)
    return SwitchConfig.parse(circuit, run.config or "", default)


def relative_errors(engine: Waveforms, oracle: Waveforms, names: Sequence[str],
                    floor: float = 1.0) -> dict[str, float]:
    """Max abs difference over the oracle peak, floored at 1e-3 of the family peak and ``floor``."""
    peaks = {n: float(np.max(np.abs(oracle[n]))) for n in names}
    family_peak = {}
    for n in names:
        family_peak[n[0]] = max(family_peak.get(n[0], 0.0), peaks[n])
    errors = {}
    for n in names:
        scale = max(peaks[n], 1e-3 * family_peak[n[0]], floor)
        diff = float(np.max(np.abs(engine[n] - oracle[n])))
        errors[n] = diff / scale if diff else 0.0
    return errors


def _static_waveforms(netlist, config, names, params) -> tuple[Waveforms, Waveforms]:
    system, x = solve_static(netlist.circuit, config)
    engine = Waveforms(np.zeros(1), {n: np.array([v]) for n, v in
                                     zip(names, signal_values(system, x, names))})
    reference = oracle_dc(netlist.circuit, config, params)
    oracle = Waveforms(np.zeros(1), {n: np.array([reference.value(n)]) for n in names})
    return engine, oracle


def execute(run: RunConfig, out) -> int:
    netlist = read_netlist(run.input)
    circuit = netlist.circuit
    if run.mode == "dump-topology":
        out.write(analyze(circuit, _static_config(run, netlist)).to_text())
        return 0
    if run.mode == "dump-system":
        out.write(assemble(circuit, _static_config(run, netlist)).describe())
        return 0

    names = validate_signals(circuit, run.signals) if run.signals else default_signals(circuit)
    params = OracleParams(run.ron, run.roff)
    tran = _tran(run, netlist)
    if run.mode == "compare":
        if tran is None:
            engine, oracle = _static_waveforms(netlist, _static_config(run, netlist), names, params)
        else:
            engine = simulate(circuit, netlist.schedule, tran, names).waveforms
            oracle = oracle_tran(circuit, netlist.schedule, tran, params, names)
        errors = relative_errors(engine, oracle, names, run.floor)
        width = max(len(n) for n in names)
        failed = False
        for name in names:
            ok = errors[name] <= run.tol
            failed |= not ok
            out.write(f"{name:<{width}}  {errors[name]:.3e}  {'PASS' if ok else 'FAIL'}\n")
        out.write(f"{'FAIL' if failed else 'PASS'} (tol {run.tol:g})\n")
        return 3 if failed else 0

    if tran is None:
        raise NetlistError("no .tran directive; give --dt and --tstop")
    if run.mode == "oracle":
        waveforms = oracle_tran(circuit, netlist.schedule, tran, params, names)
    else:
        waveforms = simulate(circuit, netlist.schedule, tran, names).waveforms
    out.write(waveforms.to_csv(names))
    return 0


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    run_config = _run_config(args)
    try:
        if run_config.output:
            with open(run_config.output, "w", encoding="utf-8", newline="\n") as handle:
                return execute(run_config, handle)
        return execute(run_config, sys.stdout)
    except (NetlistError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FormulationError, SimulationError, OracleError) as exc:
        print(f"formulation error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
