"""Pulse-timed protocols that create and then undo displacement or squeezing.

All protocols are laid out in dimensionless time ``w0 t`` and rescaled to
physical time at the end. Pulse timing is given by ramp midpoints; the
erf pulse edges sit ``3/epsilon`` outside them.

Undoing relies on mirror symmetry: if ``w(t)`` is symmetric about ``t_m``
and ``rho_dot(t_m) = 0``, the Ermakov solution is symmetric as well, so
``rho`` and ``rho_dot`` return to their initial values at ``2 t_m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .dynamics import (DEFAULT_ATOL, DEFAULT_RTOL, OscillatorConfig, find_events,
                       solve_ermakov)
from .signals import Constant, Pulse, PulseSpec, Signal, Sum, signal_from_dict

PI = math.pi
PROTOCOL_NAMES = ("displacement", "squeeze", "single-pulse", "train")


class OptimizationError(RuntimeError):
    """No admissible root was bracketed."""


@dataclass(frozen=True)
class Protocol:
    name: str
    cfg: OscillatorConfig
    t_end: float
    checkpoints: tuple[float, ...]
    epsilon: float
    t_m: Optional[float] = None
    # ramp midpoints (rise, fall) of every pulse, dimensionless
    edges: tuple[tuple[float, float], ...] = ()
    fidelity_min: float = 0.999
    mean_tol: float = 1e-3
    cov_rtol: float = 1e-3
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for t in self.checkpoints:
            if not 0.0 <= t <= self.t_end:
                raise ValueError(f"checkpoint {t} outside [0, {self.t_end}]")

    @property
    def omega0(self) -> float:
        return self.cfg.omega0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "epsilon": self.epsilon,
            "t_end": self.t_end,
            "t_m": self.t_m,
            "checkpoints": list(self.checkpoints),
            "edges_midpoints": [list(e) for e in self.edges],
            "ramp_offset": "3/epsilon",
            "thresholds": {"fidelity_min": self.fidelity_min, "mean_tol": self.mean_tol,
                           "cov_rtol": self.cov_rtol},
            "config": self.cfg.to_dict(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Protocol":
        th = d.get("thresholds", {})
        return cls(
            name=d["name"],
            cfg=OscillatorConfig.from_dict(d["config"]),
            t_end=float(d["t_end"]),
            checkpoints=tuple(float(x) for x in d.get("checkpoints", [])),
            epsilon=float(d["epsilon"]),
            t_m=None if d.get("t_m") is None else float(d["t_m"]),
            edges=tuple(tuple(e) for e in d.get("edges_midpoints", [])),
            fidelity_min=float(th.get("fidelity_min", 0.999)),
            mean_tol=float(th.get("mean_tol", 1e-3)),
            cov_rtol=float(th.get("cov_rtol", 1e-3)),
            meta=d.get("meta", {}),
        )


def _pulse(rise: float, fall: float, epsilon: float) -> Pulse:
    return Pulse(PulseSpec.from_midpoints(rise, fall, epsilon))


def _freq(edges, epsilon: float, amplitude: float) -> Signal:
    """``1 + amplitude * sum(Theta)`` in units of ``w0``."""
    return Sum(1.0, tuple((amplitude, _pulse(a, b, epsilon)) for a, b in edges))


def _mirror(edges, t_m: float):
    return [(2 * t_m - b, 2 * t_m - a) for a, b in reversed(edges)]


def _dimensionless(omega: Signal, **kw) -> OscillatorConfig:
    return OscillatorConfig(omega=omega, m=1.0, hbar=1.0, **kw)


def _physical(cfg: OscillatorConfig, omega0: float, m: float, hbar: float) -> OscillatorConfig:
    """Map a ``w0 = m = hbar = 1`` configuration onto physical units."""
    if omega0 == 1.0 and m == 1.0 and hbar == 1.0:
        return cfg
    p0 = math.sqrt(hbar * m * omega0)
    return OscillatorConfig(
        omega=cfg.omega.rescale_time(omega0) * omega0,
        Omega=cfg.Omega.rescale_time(omega0) * (p0 * omega0),
        omega_d=cfg.omega_d * omega0,
        phi=cfg.phi,
        m=m,
        hbar=hbar,
    )


def _build(name, cfg, t_end, checkpoints, epsilon, t_m, edges, units, **meta) -> Protocol:
    omega0, m, hbar = units
    cfg = _physical(cfg, omega0, m, hbar)
    s = 1.0 / omega0
    return Protocol(
        name=name,
        cfg=cfg,
        t_end=t_end * s,
        checkpoints=tuple(sorted(c * s for c in checkpoints)),
        epsilon=epsilon,
        t_m=None if t_m is None else t_m * s,
        edges=tuple((a, b) for a, b in edges),
        meta={"time_unit": "1/omega0", "omega0": omega0, "m": m, "hbar": hbar, **meta},
    )


def displacement_protocol(epsilon: float, omega0: float = 1.0, m: float = 1.0,
                          hbar: float = 1.0) -> Protocol:
    """Constant frequency and two opposite drive pulses with ramps at ``pi, 2pi, 3pi, 4pi``.

    The drive ``W(t) cos(w0 t + pi/2)`` is odd about ``5pi/2``, so the second
    pulse cancels the displacement left by the first.
    """
    _check_eps(epsilon)
    edges = [(PI, 2 * PI), (3 * PI, 4 * PI)]
    Omega = 2.0 * (_pulse(*edges[0], epsilon) - _pulse(*edges[1], epsilon))
    cfg = _dimensionless(Constant(1.0), Omega=Omega, omega_d=1.0, phi=PI / 2)
    checkpoints = (PI, 1.5 * PI, 2.5 * PI, 3.5 * PI)
    return _build("displacement", cfg, 5 * PI, checkpoints, epsilon, 2.5 * PI, edges,
                  (omega0, m, hbar))


def optimize_mirror_time(
    edges: Sequence[tuple[float, float]],
    epsilon: float,
    amplitude: float = 1.0,
    which: int = 1,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    xtol: float = 1e-12,
) -> float:
    """Mirror time ``t_m`` for a half protocol given by pulse ``edges`` (dimensionless).

    Scans one period past the last edge for maxima of ``rho`` (``rho_dot``
    crossing zero, ``theta_q`` changing sign), takes the ``which``-th one,
    then re-solves with the pulses mirrored about each trial ``t_m`` and
    solves ``rho_dot(t_m) = 0`` for the full symmetric protocol with a bracketed root finder.
    """
    edges = [tuple(map(float, e)) for e in edges]
    if not edges:
        raise OptimizationError("no pulses to mirror")
    last = max(b for _, b in edges) + 3.0 / epsilon
    window = (last, last + 2 * PI)
    half = _dimensionless(_freq(edges, epsilon, amplitude))
    sol = solve_ermakov(half, window[1] + 0.1, rtol, atol)
    ev = find_events(sol, "rho_max", window)
    if ev.degenerate:
        raise OptimizationError(f"event function is degenerate on window {window}")
    if len(ev) < which:
        raise OptimizationError(f"only {len(ev)} rho maxima found in window {window}")
    guess = ev[which - 1]

    def rho_dot_mid(t_m: float) -> float:
        full = edges + _mirror(edges, t_m)
        s = solve_ermakov(_dimensionless(_freq(full, epsilon, amplitude)), t_m, rtol, atol)
        return float(s.rho_dot(t_m))

    return _refine(rho_dot_mid, guess, 0.25, xtol, window)


def _refine(g: Callable[[float], float], guess: float, delta: float, xtol: float, window) -> float:
    lo, hi = guess - delta, guess + delta
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if glo * ghi > 0:
        raise OptimizationError(f"no sign change bracketed near {guess} (scanned window {window})")
    return float(brentq(g, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))


def squeeze_protocol(epsilon: float, first_pulse: Optional[tuple[float, float]] = None,
                     which: int = 2, omega0: float = 1.0, m: float = 1.0,
                     hbar: float = 1.0) -> Protocol:
    """Two frequency-doubling pulses mirrored about an optimized ``t_m``.

    The first pulse's ramp midpoints default to ``(9pi/10, 21pi/10)`` for
    slow ramps (``epsilon < 10``) and ``(7pi/8, 17pi/8)`` otherwise. ``t_m``
    is the ``which``-th maximum of ``rho`` after the first pulse, where
    ``theta_q`` vanishes and the state is squeezed without shear.
    """
    _check_eps(epsilon)
    if first_pulse is None:
        first_pulse = (9 * PI / 10, 21 * PI / 10) if epsilon < 10 else (7 * PI / 8, 17 * PI / 8)
    half = [tuple(map(float, first_pulse))]
    t_m = optimize_mirror_time(half, epsilon, 1.0, which)
    edges = half + _mirror(half, t_m)
    cfg = _dimensionless(_freq(edges, epsilon, 1.0))
    checkpoints = (half[0][0], half[0][1], t_m, min(t_m + 1.5 * PI, 2 * t_m))
    return _build("squeeze", cfg, 2 * t_m, checkpoints, epsilon, t_m, edges,
                  (omega0, m, hbar), which_max=which)


def single_pulse_return(epsilon: float, rise: float = PI, amplitude: float = 1.0,
                        which: int = 1, omega0: float = 1.0, m: float = 1.0,
                        hbar: float = 1.0) -> Protocol:
    """One pulse whose length makes ``rho`` and ``rho_dot`` return to their start values.

    The pulse is symmetric about its center, so it suffices that
    ``rho_dot`` vanishes there; the center is placed on the ``which``-th
    minimum of ``rho`` after the rising ramp (maximum squeezing mid-pulse).
    """
    _check_eps(epsilon)
    rise = float(rise)
    probe_end = rise + 4 * PI
    probe = _dimensionless(_freq([(rise, probe_end)], epsilon, amplitude))
    sol = solve_ermakov(probe, probe_end)
    window = (rise, rise + 2 * PI)
    ev = find_events(sol, "rho_min", window)
    if ev.degenerate:
        raise OptimizationError(f"event function is degenerate on window {window}: nothing to undo")
    if len(ev) < which:
        raise OptimizationError(f"only {len(ev)} rho minima found in window {window}")
    center0 = ev[which - 1]

    def rho_dot_center(center: float) -> float:
        s = solve_ermakov(_dimensionless(_freq([(rise, 2 * center - rise)], epsilon, amplitude)), center)
        return float(s.rho_dot(center))

    delta = min(0.25, 0.5 * (center0 - rise))
    center = _refine(rho_dot_center, center0, delta, 1e-12, window)
    fall = 2 * center - rise
    edges = [(rise, fall)]
    cfg = _dimensionless(_freq(edges, epsilon, amplitude))
    t_end = fall + rise  # symmetric about the pulse center
    checkpoints = (rise, center, fall)
    return _build("single-pulse", cfg, t_end, checkpoints, epsilon, center, edges,
                  (omega0, m, hbar), amplitude=amplitude)


TRAIN_CHECKPOINTS = (PI, 3.363 * PI, 5.772 * PI, 9.136 * PI)


def train_protocol(epsilon: float, n_pulses: int = 10, amplitude: float = 0.1,
                   first_rise: float = PI, which: int = 1, omega0: float = 1.0,
                   m: float = 1.0, hbar: float = 1.0) -> Protocol:
    """Squeezing accumulated pulse by pulse, then undone by the mirrored train.

    Each first-half pulse rises at a maximum of ``rho`` and falls at the next
    minimum, placed greedily one pulse at a time with earlier edges frozen.
    """
    _check_eps(epsilon)
    if n_pulses < 2 or n_pulses % 2:
        raise ValueError("n_pulses must be even and at least 2")
    edges: list[tuple[float, float]] = []
    rise = float(first_rise)
    for j in range(n_pulses // 2):
        if j:
            sol = solve_ermakov(_dimensionless(_freq(edges, epsilon, amplitude)), edges[-1][1] + 2 * PI + 0.5)
            window = (edges[-1][1] + 0.05, edges[-1][1] + 2 * PI)
            ev = find_events(sol, "rho_max", window)
            if not ev:
                raise OptimizationError(f"no rho maximum for pulse {j} in window {window}")
            rise = ev[0]
        probe_end = rise + 4 * PI
        sol = solve_ermakov(_dimensionless(_freq(edges + [(rise, probe_end)], epsilon, amplitude)), probe_end)
        window = (rise + 0.05, rise + 2 * PI)
        ev = find_events(sol, "rho_min", window)
        if ev.degenerate or not ev:
            raise OptimizationError(f"no rho minimum for pulse {j} in window {window}")
        frozen = list(edges)

        def rho_dot_fall(fall: float, frozen=frozen, rise=rise) -> float:
            cfg = _dimensionless(_freq(frozen + [(rise, fall)], epsilon, amplitude))
            return float(solve_ermakov(cfg, fall).rho_dot(fall))

        delta = min(0.25, 0.5 * (ev[0] - rise))
        fall = _refine(rho_dot_fall, ev[0], delta, 1e-12, window)
        edges.append((rise, fall))
    t_m = optimize_mirror_time(edges, epsilon, amplitude, which)
    full = edges + _mirror(edges, t_m)
    cfg = _dimensionless(_freq(full, epsilon, amplitude))
    checkpoints = tuple(c for c in TRAIN_CHECKPOINTS if c <= 2 * t_m)
    return _build("train", cfg, 2 * t_m, checkpoints, epsilon, t_m, full,
                  (omega0, m, hbar), amplitude=amplitude, n_pulses=n_pulses)


def build_protocol(name: str, epsilon: float, **kw) -> Protocol:
    builders = {
        "displacement": displacement_protocol,
        "squeeze": squeeze_protocol,
        "single-pulse": single_pulse_return,
        "train": train_protocol,
    }
    if name not in builders:
        raise ValueError(f"unknown protocol {name!r}; expected one of {PROTOCOL_NAMES}")
    return builders[name](epsilon, **kw)


def _check_eps(epsilon: float) -> None:
    if not (isinstance(epsilon, (int, float)) and math.isfinite(epsilon) and epsilon > 0):
        raise ValueError(f"epsilon must be a positive finite number, got {epsilon!r}")
