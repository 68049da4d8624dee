"""Ermakov and classical-drive integration with dense output and events.

Both solvers integrate piecewise: the time window is cut at the edges of
every ramp window reported by the signals, and each piece gets its own
maximum step so that steep erf ramps cannot be stepped over. The pieces are
stitched back into one :class:`scipy.integrate.OdeSolution`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.integrate import OdeSolution, solve_ivp
from scipy.optimize import brentq

from .signals import Constant, Signal

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_METHOD = "DOP853"


class IntegrationError(RuntimeError):
    """The adaptive integrator could not advance (step-size underflow)."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (at t={t!r})")
        self.t = t


@dataclass(frozen=True)
class OscillatorConfig:
    """Parameters of ``H = p^2/2m + m w(t)^2 q^2/2 + W(t) cos(w_d t + phi) q``."""

    omega: Signal
    Omega: Signal = field(default_factory=lambda: Constant(0.0))
    omega_d: float = 1.0
    phi: float = 0.0
    m: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"mass must be positive, got {self.m}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be positive, got {self.hbar}")
        if not float(self.omega(0.0)) > 0:
            raise ValueError("omega(0) must be positive")

    @property
    def omega0(self) -> float:
        return float(self.omega(0.0))

    @property
    def q0(self) -> float:
        return math.sqrt(self.hbar / (self.m * self.omega0))

    @property
    def p0(self) -> float:
        return math.sqrt(self.hbar * self.m * self.omega0)

    def force(self, t):
        """Coefficient of ``q`` in the Hamiltonian."""
        return self.Omega(t) * np.cos(self.omega_d * t + self.phi)

    def ramp_windows(self):
        return self.omega.ramp_windows() + self.Omega.ramp_windows()

    def check_omega(self, ts: np.ndarray) -> None:
        w = np.asarray(self.omega(ts))
        bad = np.flatnonzero(~(w > 0))
        if bad.size:
            raise ValueError(f"omega(t) is not positive at t={float(ts[bad[0]])!r}")

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "hbar": self.hbar,
            "omega": self.omega.to_dict(),
            "Omega": self.Omega.to_dict(),
            "omega_d": self.omega_d,
            "phi": self.phi,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OscillatorConfig":
        from .signals import signal_from_dict

        return cls(
            omega=signal_from_dict(d["omega"]),
            Omega=signal_from_dict(d.get("Omega", {"kind": "constant", "value": 0.0})),
            omega_d=float(d.get("omega_d", 1.0)),
            phi=float(d.get("phi", 0.0)),
            m=float(d.get("m", 1.0)),
            hbar=float(d.get("hbar", 1.0)),
        )


def _segments(t_end: float, windows, default_step: float):
    """Split ``[0, t_end]`` into ``(a, b, max_step)`` pieces."""
    cuts = {0.0, float(t_end)}
    for a, b, _ in windows:
        for c in (a, b):
            if 0.0 < c < t_end:
                cuts.add(float(c))
    cuts = sorted(cuts)
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= 0:
            continue
        mid = 0.5 * (a + b)
        step = default_step
        for wa, wb, ws in windows:
            if wa <= mid <= wb:
                step = min(step, ws)
        out.append((a, b, step))
    return out


def _integrate(rhs, y0, t_end, windows, rtol, atol, method, max_step=np.inf):
    ts = [0.0]
    interps = []
    nodes = [np.array([0.0])]
    y = np.asarray(y0, dtype=float)
    for a, b, step in _segments(t_end, windows, max_step):
        sol = solve_ivp(rhs, (a, b), y, method=method, rtol=rtol, atol=atol,
                        max_step=step, dense_output=True)
        if sol.status != 0:
            t_fail = float(sol.t[-1]) if sol.t.size else a
            raise IntegrationError(f"integration failed: {sol.message}", t_fail)
        interps.extend(sol.sol.interpolants)
        ts.extend(sol.sol.ts[1:].tolist())
        nodes.append(sol.t[1:])
        y = sol.y[:, -1]
    return OdeSolution(np.array(ts), interps), np.concatenate(nodes)


@dataclass(frozen=True)
class ErmakovSolution:
    """Dense solution of the Ermakov equation plus the accumulated ``I = int rho^-2``."""

    cfg: OscillatorConfig
    t_end: float
    sol: OdeSolution
    nodes: np.ndarray

    def _y(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12) or np.any(t > self.t_end * (1 + 1e-12) + 1e-12):
            raise ValueError(f"time outside solved window [0, {self.t_end}]")
        return self.sol(np.clip(t, 0.0, self.t_end))

    def rho(self, t):
        return self._y(t)[0]

    def rho_dot(self, t):
        return self._y(t)[1]

    def integral(self, t):
        """``int_0^t rho^-2 dtau``."""
        return self._y(t)[2]

    def r(self, t):
        m, w0 = self.cfg.m, self.cfg.omega0
        return 0.5 * np.log(math.sqrt(m * w0) * self.rho(t))

    def theta_q(self, t):
        y = self._y(t)
        return -0.5 * self.cfg.m * y[1] / y[0]

    def phi_q2(self, t):
        return 0.5 * self.cfg.omega0 * self.integral(t)

    def phi_p2(self, t):
        m, w0 = self.cfg.m, self.cfg.omega0
        return self.integral(t) / (2 * m * m * w0)

    def residual(self, ts: Optional[np.ndarray] = None) -> np.ndarray:
        """``rho'' + w^2 rho - 1/(m^2 rho^3)`` with ``rho''`` differentiated from the interpolant.

        The derivative of ``rho_dot`` uses a five-point stencil whose width is
        scaled to the steepest ramp in the frequency signal.
        """
        if ts is None:
            ts = self.nodes
        ts = np.asarray(ts, dtype=float)
        eps_max = max([p.epsilon for p in self.cfg.omega.pulses()] + [self.cfg.omega0])
        h = min(1e-3, 2e-3 / eps_max) if eps_max > 1 else 1e-3
        ts = np.clip(ts, 2 * h, self.t_end - 2 * h)
        # one interpolant call for all stencil points; per-call overhead dominates otherwise
        offsets = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * h
        y = self._y((ts[None, :] + offsets[:, None]).ravel()).reshape(3, 5, ts.size)
        rd = y[1]
        acc = (-rd[4] + 8 * rd[3] - 8 * rd[1] + rd[0]) / (12 * h)
        rho = y[0, 2]
        w = np.asarray(self.cfg.omega(ts))
        return acc + w * w * rho - 1.0 / (self.cfg.m ** 2 * rho ** 3)

    def residual_rms(self, ts: Optional[np.ndarray] = None) -> float:
        """RMS residual in units of ``omega0^2 * rho(0)``."""
        res = self.residual(ts)
        scale = self.cfg.omega0 ** 2 / math.sqrt(self.cfg.m * self.cfg.omega0)
        return float(np.sqrt(np.mean(res ** 2)) / scale)

    def invariant(self, t, w: float):
        """``rho_dot^2 + w^2 rho^2 + 1/(m^2 rho^2)``; conserved wherever omega == w."""
        y = self._y(t)
        return y[1] ** 2 + w * w * y[0] ** 2 + 1.0 / (self.cfg.m ** 2 * y[0] ** 2)


@dataclass(frozen=True)
class DriveSolution:
    """Dense solution of the classical forced oscillator and the phase action ``L``."""

    cfg: OscillatorConfig
    t_end: float
    sol: OdeSolution
    nodes: np.ndarray

    def _y(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12) or np.any(t > self.t_end * (1 + 1e-12) + 1e-12):
            raise ValueError(f"time outside solved window [0, {self.t_end}]")
        return self.sol(np.clip(t, 0.0, self.t_end))

    def beta_q(self, t):
        return self._y(t)[0]

    def beta_p(self, t):
        return self._y(t)[1]

    def L(self, t):
        return self._y(t)[2]


def _default_max_step(cfg: OscillatorConfig, t_end: float) -> float:
    # a tenth of the fastest local period keeps dense-output derivatives accurate
    w = np.abs(np.asarray(cfg.omega(np.linspace(0.0, t_end, 2001)), dtype=float))
    return 0.1 / max(float(w.max()), cfg.omega0)


def solve_ermakov(cfg: OscillatorConfig, t_end: float, rtol: float = DEFAULT_RTOL,
                  atol: float = DEFAULT_ATOL, method: str = DEFAULT_METHOD) -> ErmakovSolution:
    """Integrate ``rho'' + w(t)^2 rho = 1/(m^2 rho^3)`` from the ground-state initial data.

    The state vector is ``(rho, rho_dot, int rho^-2)`` so the rotation
    quadrature shares the integrator's error control.
    """
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    m = cfg.m
    omega = cfg.omega.scalar()
    inv_m2 = 1.0 / (m * m)

    def rhs(t, y):
        w = omega(t)
        rho, v = y[0], y[1]
        return [v, inv_m2 / rho ** 3 - w * w * rho, 1.0 / (rho * rho)]

    y0 = [1.0 / math.sqrt(m * cfg.omega0), 0.0, 0.0]
    sol, nodes = _integrate(rhs, y0, t_end, cfg.omega.ramp_windows(), rtol, atol, method,
                            _default_max_step(cfg, t_end))
    cfg.check_omega(nodes)
    return ErmakovSolution(cfg, float(t_end), sol, nodes)


def solve_drive(cfg: OscillatorConfig, t_end: float, rtol: float = DEFAULT_RTOL,
                atol: float = DEFAULT_ATOL, method: str = DEFAULT_METHOD) -> DriveSolution:
    """Integrate the forced oscillator for ``(beta_q, beta_p)`` and ``L = int l dt``.

    ``beta_p = -m d(beta_q)/dt`` and
    ``l = beta_p^2/2m + m w^2 beta_q^2/2 + F(t) beta_q`` with ``F`` the drive force.
    """
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    m = cfg.m
    omega = cfg.omega.scalar()

    def rhs(t, y):
        bq, bp = y[0], y[1]
        w2 = omega(t) ** 2
        f = cfg.force(t)
        ell = bp * bp / (2 * m) + 0.5 * m * w2 * bq * bq + f * bq
        return [-bp / m, m * w2 * bq + f, ell]

    w0 = cfg.omega0
    bq0 = -float(cfg.Omega(0.0)) * math.cos(cfg.phi) / (m * w0 * w0)
    windows = cfg.ramp_windows()
    sol, nodes = _integrate(rhs, [bq0, 0.0, 0.0], t_end, windows, rtol, atol, method,
                            min(_default_max_step(cfg, t_end), 0.5 / max(cfg.omega_d, 1e-300)))
    cfg.check_omega(nodes)
    return DriveSolution(cfg, float(t_end), sol, nodes)


class EventList(list):
    """List of event times; ``degenerate`` is set when the event function vanished identically."""

    degenerate: bool = False


EVENT_KINDS = ("rho_dot_zero", "rho_max", "rho_min", "theta_q_zero")
_DEGENERATE = 1e-12


def find_events(sol: ErmakovSolution, kind: str, window: tuple[float, float],
                xtol: float = 1e-12, samples_per_step: int = 4) -> EventList:
    """Sign-change-bracketed roots of the event function inside ``window``.

    ``kind`` is one of ``rho_dot_zero``, ``rho_max``, ``rho_min`` or
    ``theta_q_zero``. Maxima are ``rho_dot`` crossings from positive to
    negative, minima the reverse.
    """
    if kind not in EVENT_KINDS:
        raise ValueError(f"unknown event kind {kind!r}; expected one of {EVENT_KINDS}")
    a, b = float(window[0]), float(window[1])
    if a < 0 or b > sol.t_end + 1e-12 or not b > a:
        raise ValueError(f"window {window} not inside solved range [0, {sol.t_end}]")
    b = min(b, sol.t_end)

    func: Callable = sol.theta_q if kind == "theta_q_zero" else sol.rho_dot
    nodes = sol.nodes[(sol.nodes > a) & (sol.nodes < b)]
    knots = np.concatenate([[a], nodes, [b]])
    frac = np.linspace(0.0, 1.0, samples_per_step + 1)[:-1]
    grid = (knots[:-1, None] + np.diff(knots)[:, None] * frac[None, :]).ravel()
    grid = np.append(grid, b)
    vals = np.asarray(func(grid))

    out = EventList()
    scale = float(np.max(np.abs(vals)))
    if scale < _DEGENERATE:
        out.degenerate = True
        return out
    floor = _DEGENERATE * max(scale, 1.0)
    sgn = np.sign(np.where(np.abs(vals) <= floor, 0.0, vals))
    # carry the last nonzero sign across numerically-zero samples
    idx = np.flatnonzero(sgn)
    if idx.size < 2:
        return out
    for i, j in zip(idx[:-1], idx[1:]):
        if sgn[i] == sgn[j]:
            continue
        rising = sgn[j] > 0
        if kind == "rho_max" and rising:
            continue
        if kind == "rho_min" and not rising:
            continue
        # rho_dot falling through zero == rho maximum == theta_q rising
        lo, hi = grid[i], grid[j]
        if j - i > 1:
            # zero plateau between brackets: report its center
            root = 0.5 * (grid[i + 1] + grid[j - 1])
        else:
            root = brentq(lambda s: float(func(s)), lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
        out.append(float(root))
    return out


TRAJECTORY_HEADER = ["t", "rho", "rho_dot", "r", "theta_q", "phi_q2", "phi_p2",
                     "beta_q", "beta_p", "L"]


def write_trajectory_csv(path, erm: ErmakovSolution, drv: DriveSolution, ts: Iterable[float]) -> None:
    """Write the dynamics trajectory; floats use ``repr`` so they round-trip."""
    ts = np.asarray(list(ts), dtype=float)
    cols = [ts, erm.rho(ts), erm.rho_dot(ts), erm.r(ts), erm.theta_q(ts), erm.phi_q2(ts),
            erm.phi_p2(ts), drv.beta_q(ts), drv.beta_p(ts), drv.L(ts)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_HEADER)
        for row in zip(*cols):
            w.writerow([repr(float(x)) for x in row])
