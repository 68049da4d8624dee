"""Command-line front end.

    lieqho simulate --protocol squeeze --epsilon 1000 --out runs/
    lieqho husimi   --protocol displacement --epsilon 2 --times 4.71238898
    lieqho verify   --protocol train --epsilon 2 --fock-n 128

Times on the command line and in file names are dimensionless ``w0 t``.
Exit codes: 0 ok, 2 config error, 3 solver failure, 4 time outside the
window, 5 verification threshold breached, 6 Fock truncation breached.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .dynamics import (DEFAULT_ATOL, DEFAULT_RTOL, IntegrationError, OscillatorConfig,
                       write_trajectory_csv)
from .fock_oracle import DtPolicy, TruncationError, write_comparison_csv
from .liegroup import write_factors_csv
from .phasespace import (GridSpec, husimi_gaussian, husimi_normalization, window_coverage,
                         write_field_csv)
from .protocols import PROTOCOL_NAMES, OptimizationError, Protocol, _physical, build_protocol
from .signals import signal_from_dict
from .verification import compare_paths, end_state_contract, run_factorized

log = logging.getLogger("lieqho")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_WINDOW, EXIT_BREACH, EXIT_TRUNCATION = 0, 2, 3, 4, 5, 6


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    protocol: Optional[str] = None
    signal: Optional[dict] = None
    epsilon: Optional[float] = None
    units: dict = field(default_factory=lambda: {"m": 1.0, "hbar": 1.0, "omega0": 1.0})
    out: str = "."
    grid: str = "-6,6,-6,6,121,121"
    times: Optional[list] = None
    samples: int = 401
    fock_n: int = 128
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    steps_per_period: int = 200
    magnus_order: int = 4

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _positive(name, value, kind=float):
    try:
        v = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a {kind.__name__}, got {value!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise ConfigError(f"{name} must be positive, got {value!r}")
    return v


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Merge ``--config`` (a RunConfig or a previous manifest) with command-line flags."""
    data: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from None
        data = data.get("inputs", data)
    known = RunConfig.__dataclass_fields__
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    rc = RunConfig(**data)
    for flag, key in [("protocol", "protocol"), ("epsilon", "epsilon"), ("grid", "grid"),
                      ("fock_n", "fock_n"), ("rtol", "rtol"), ("atol", "atol"),
                      ("samples", "samples"), ("steps_per_period", "steps_per_period"),
                      ("magnus_order", "magnus_order")]:
        v = getattr(args, flag, None)
        if v is not None:
            setattr(rc, key, v)
    if getattr(args, "times", None):
        try:
            rc.times = [float(x) for x in args.times.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"times: cannot parse {args.times!r}") from None
    out = args.out or data.get("out") or os.environ.get("QHO_OUT_DIR") or "."
    rc.out = out
    validate(rc)
    return rc


def validate(rc: RunConfig) -> None:
    if (rc.protocol is None) == (rc.signal is None):
        raise ConfigError("protocol: give exactly one of a protocol name or an inline signal")
    if rc.protocol is not None:
        if rc.protocol not in PROTOCOL_NAMES:
            raise ConfigError(f"protocol must be one of {PROTOCOL_NAMES}, got {rc.protocol!r}")
        if rc.epsilon is None:
            raise ConfigError("epsilon is required for named protocols")
        rc.epsilon = _positive("epsilon", rc.epsilon)
    elif "t_end" not in rc.signal or "omega" not in rc.signal:
        raise ConfigError("signal: inline signal needs 'omega' and 't_end'")
    for k in ("m", "hbar", "omega0"):
        rc.units[k] = _positive(f"units.{k}", rc.units.get(k, 1.0))
    rc.rtol = _positive("rtol", rc.rtol)
    rc.atol = _positive("atol", rc.atol)
    rc.fock_n = int(_positive("fock_n", rc.fock_n, int))
    rc.samples = int(_positive("samples", rc.samples, int))
    rc.steps_per_period = int(_positive("steps_per_period", rc.steps_per_period, int))
    if rc.magnus_order not in (2, 4):
        raise ConfigError(f"magnus_order must be 2 or 4, got {rc.magnus_order!r}")
    try:
        GridSpec.parse(rc.grid)
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None


def resolve_protocol(rc: RunConfig) -> Protocol:
    u = rc.units
    if rc.protocol is not None:
        return build_protocol(rc.protocol, rc.epsilon, omega0=u["omega0"], m=u["m"], hbar=u["hbar"])
    s = rc.signal
    try:
        cfg = OscillatorConfig(
            omega=signal_from_dict(s["omega"]),
            Omega=signal_from_dict(s.get("Omega", {"kind": "constant", "value": 0.0})),
            omega_d=float(s.get("omega_d", 1.0)),
            phi=float(s.get("phi", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"signal: {exc}") from None
    cfg = _physical(cfg, u["omega0"], u["m"], u["hbar"])
    t_end = _positive("signal.t_end", s["t_end"]) / u["omega0"]
    checkpoints = tuple(float(c) / u["omega0"] for c in s.get("checkpoints", []))
    eps = [p.epsilon for p in cfg.omega.pulses() + cfg.Omega.pulses()]
    return Protocol("custom", cfg, t_end, checkpoints, max(eps) if eps else math.inf,
                    meta={"time_unit": "1/omega0", **u})


def _sample_times(p: Protocol, n: int) -> np.ndarray:
    return np.unique(np.concatenate([np.linspace(0.0, p.t_end, n), p.checkpoints]))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _stem(p: Protocol, rc: RunConfig) -> str:
    eps = "inf" if not math.isfinite(p.epsilon) else repr(float(p.epsilon))
    return f"{p.name}_eps{eps}"


def _write_manifest(path: Path, rc: RunConfig, p: Protocol, artifacts: list[Path], extra: dict) -> None:
    doc = {
        "lieqho_version": __version__,
        "inputs": rc.to_dict(),
        "protocol": p.to_dict(),
        "tolerances": {"rtol": rc.rtol, "atol": rc.atol},
        "artifacts": {a.name: _sha256(a) for a in artifacts},
        **extra,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_simulate(rc: RunConfig) -> int:
    p = resolve_protocol(rc)
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    ts = _sample_times(p, rc.samples)
    run = run_factorized(p.cfg, p.t_end, ts, rc.rtol, rc.atol)
    stem = _stem(p, rc)
    dyn = out / f"{stem}_dynamics.csv"
    fac = out / f"{stem}_factors.csv"
    write_trajectory_csv(dyn, run.erm, run.drv, ts)
    write_factors_csv(fac, run.factors)
    dmean, dcov, ok = end_state_contract(run.states[-1], p.mean_tol, p.cov_rtol)
    w0 = p.omega0
    extra = {
        "t_m": p.t_m,
        "t_m_dimensionless": None if p.t_m is None else p.t_m * w0,
        "epsilon": p.epsilon,
        "end_state": {"mean_delta": dmean, "cov_rel_delta": dcov, "vacuum_restored": ok},
        "ermakov_residual_rms": run.erm.residual_rms(),
    }
    _write_manifest(out / f"{stem}_manifest.json", rc, p, [dyn, fac], extra)
    log.info("wrote %s, %s", dyn, fac)
    return EXIT_OK


def cmd_husimi(rc: RunConfig) -> int:
    p = resolve_protocol(rc)
    w0 = p.omega0
    times = [t / w0 for t in rc.times] if rc.times else list(p.checkpoints) or [0.0]
    for t in times:
        if not 0.0 <= t <= p.t_end * (1 + 1e-12):
            log.error("time w0 t=%r outside protocol window [0, %r]", t * w0, p.t_end * w0)
            return EXIT_WINDOW
    grid = GridSpec.parse(rc.grid)
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    run = run_factorized(p.cfg, p.t_end, [min(t, p.t_end) for t in times], rc.rtol, rc.atol)
    stem = _stem(p, rc)
    artifacts = []
    for t, state in zip(times, run.states):
        field_ = husimi_gaussian(state, grid)
        coverage = window_coverage(state, grid)
        if coverage < 5.0:
            log.warning("grid covers only %.2f sigma at w0 t=%r; normalization will fall short of 1",
                        coverage, t * w0)
        path = out / f"{stem}_husimi_wt{t * w0:.6f}.csv"
        write_field_csv(path, field_, {
            "protocol": p.name,
            "epsilon": p.epsilon,
            "time_dimensionless": t * w0,
            "mean": state.mean.tolist(),
            "cov": state.cov.tolist(),
            "normalization": husimi_normalization(field_),
            "window_sigma": coverage,
            "peak": list(field_.peak()),
        })
        artifacts.append(path)
    _write_manifest(out / f"{stem}_husimi_manifest.json", rc, p, artifacts, {})
    return EXIT_OK


def cmd_verify(rc: RunConfig) -> int:
    p = resolve_protocol(rc)
    out = Path(rc.out)
    out.mkdir(parents=True, exist_ok=True)
    ts = _sample_times(p, min(rc.samples, 81))
    policy = DtPolicy(steps_per_period=rc.steps_per_period, order=rc.magnus_order)
    fid_min = p.fidelity_min if p.name != "custom" else None
    cmp = compare_paths(p.cfg, p.t_end, ts, rc.fock_n, policy, rc.rtol, rc.atol, fidelity_min=fid_min)
    stem = _stem(p, rc)
    traj = out / f"{stem}_oracle.csv"
    write_comparison_csv(traj, cmp.rows)
    deltas = out / f"{stem}_deltas.csv"
    with open(deltas, "w", encoding="utf-8", newline="") as fh:
        fh.write("t,delta_mean_q,delta_mean_p,cov_rel_delta,fidelity_vs_factorized\n")
        for t, dm, dc, f in zip(cmp.times, cmp.mean_delta, cmp.cov_rel, cmp.fidelity_vs_factorized):
            fh.write(",".join(repr(float(x)) for x in (t, dm[0], dm[1], dc, f)) + "\n")
    _write_manifest(out / f"{stem}_verify.json", rc, p, [traj, deltas], {"summary": cmp.summary()})
    for b in cmp.breaches:
        log.error("breach: %s", b)
    return EXIT_OK if cmp.passed else EXIT_BREACH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lieqho", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("simulate", "integrate a protocol and export trajectories"),
                        ("husimi", "export Husimi Q grids at given times"),
                        ("verify", "compare the factorized path against the Fock oracle")]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--protocol", choices=PROTOCOL_NAMES)
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--config", help="RunConfig JSON or a previous manifest")
        sp.add_argument("--out", help="output directory (default $QHO_OUT_DIR or .)")
        sp.add_argument("--grid", help="qmin,qmax,pmin,pmax,nq,np in q0/p0 units")
        sp.add_argument("--times", help="comma-separated w0 t values")
        sp.add_argument("--samples", type=int, help="number of output samples")
        sp.add_argument("--fock-n", dest="fock_n", type=int)
        sp.add_argument("--rtol", type=float)
        sp.add_argument("--atol", type=float)
        sp.add_argument("--steps-per-period", dest="steps_per_period", type=int)
        sp.add_argument("--magnus-order", dest="magnus_order", type=int)
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


COMMANDS = {"simulate": cmd_simulate, "husimi": cmd_husimi, "verify": cmd_verify}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        rc = load_run_config(args)
        return COMMANDS[args.command](rc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TruncationError as exc:
        print(f"truncation breach: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except (IntegrationError, OptimizationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
