"""Time-dependent scalar parameters built from constants and erf pulses.

Every signal is an immutable value object with an analytic value and first
derivative. Signals evaluate elementwise on numpy arrays as well as floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np
from scipy.special import erf

ArrayLike = Union[float, np.ndarray]

_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)

# ramp midpoints sit this many 1/epsilon widths inside the pulse edges
RAMP_OFFSET = 3.0
# half-width (in 1/epsilon) of the window where integrators must resolve a ramp
RAMP_WINDOW = 6.0


@dataclass(frozen=True)
class PulseSpec:
    """Edges and steepness of one erf pulse.

    The rising ramp is centered at ``t_i + 3/epsilon`` and the falling ramp
    at ``t_o - 3/epsilon``.
    """

    t_i: float
    t_o: float
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.t_o > self.t_i:
            raise ValueError(f"t_o must exceed t_i, got t_i={self.t_i}, t_o={self.t_o}")
        if not self.t_o - self.t_i > 2 * RAMP_OFFSET / self.epsilon:
            raise ValueError(
                "pulse has no plateau: t_o - t_i must exceed 6/epsilon "
                f"(t_i={self.t_i}, t_o={self.t_o}, epsilon={self.epsilon})"
            )

    @classmethod
    def from_midpoints(cls, rise: float, fall: float, epsilon: float) -> "PulseSpec":
        """Build a pulse from its ramp midpoints."""
        off = RAMP_OFFSET / epsilon
        return cls(rise - off, fall + off, epsilon)

    @property
    def rise(self) -> float:
        return self.t_i + RAMP_OFFSET / self.epsilon

    @property
    def fall(self) -> float:
        return self.t_o - RAMP_OFFSET / self.epsilon


def eval_theta(t: ArrayLike, spec: PulseSpec) -> ArrayLike:
    """Smooth step pulse ``1/4 [1 + erf(e(t - rise))] [1 + erf(-e(t - fall))]``."""
    eps = spec.epsilon
    if np.ndim(t) == 0:
        # scalar path for ODE right-hand sides; avoids ufunc overhead
        t = float(t)
        return 0.25 * (1.0 + math.erf(eps * (t - spec.rise))) * (1.0 + math.erf(-eps * (t - spec.fall)))
    up = 1.0 + erf(eps * (t - spec.rise))
    down = 1.0 + erf(-eps * (t - spec.fall))
    return 0.25 * up * down


def eval_theta_derivative(t: ArrayLike, spec: PulseSpec) -> ArrayLike:
    eps = spec.epsilon
    x = eps * (t - spec.rise)
    y = -eps * (t - spec.fall)
    up = 1.0 + erf(x)
    down = 1.0 + erf(y)
    dup = 2.0 * _INV_SQRT_PI * eps * np.exp(-x * x)
    ddown = -2.0 * _INV_SQRT_PI * eps * np.exp(-y * y)
    return 0.25 * (dup * down + up * ddown)


class Signal:
    """Base class for scalar signals."""

    def __call__(self, t: ArrayLike) -> ArrayLike:
        return self.value(t)

    def value(self, t: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def derivative(self, t: ArrayLike) -> ArrayLike:
        raise NotImplementedError

    def pulses(self) -> list[PulseSpec]:
        """All pulses contained in the expression tree."""
        return []

    def scalar(self):
        """A plain ``float -> float`` evaluator for hot loops such as ODE right-hand sides."""
        return lambda t: float(self.value(t))

    def ramp_windows(self) -> list[tuple[float, float, float]]:
        """Intervals ``(start, stop, max_step)`` where a ramp must be resolved.

        Each window spans ``6/epsilon`` outside the pulse edge and ``6/epsilon``
        past the ramp midpoint on the plateau side. A window of only
        ``+-6/epsilon`` about the edge would stop ``3/epsilon`` after the
        midpoint, and one long step across the remaining erf tail degrades
        the dense output to ~1e-8 in ``rho_dot``.
        """
        out = []
        for p in self.pulses():
            half = RAMP_WINDOW / p.epsilon
            inner = (RAMP_WINDOW + RAMP_OFFSET) / p.epsilon
            step = 0.3 / p.epsilon
            out.append((p.t_i - half, p.t_i + inner, step))
            out.append((p.t_o - inner, p.t_o + half, step))
        return out

    def is_constant(self) -> bool:
        return not self.pulses()

    def rescale_time(self, c: float) -> "Signal":
        """Return ``s'`` with ``s'(t) = s(c t)``."""
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    # arithmetic sugar used by the protocol builders
    def __add__(self, other):
        return _as_sum(self) + other

    __radd__ = __add__

    def __mul__(self, c):
        return _as_sum(self) * c

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rsub__(self, other):
        return (-1.0) * self + other


@dataclass(frozen=True)
class Constant(Signal):
    c: float

    def value(self, t):
        if np.ndim(t):
            return np.full(np.shape(t), float(self.c))
        return float(self.c)

    def derivative(self, t):
        if np.ndim(t):
            return np.zeros(np.shape(t))
        return 0.0

    def scalar(self):
        c = float(self.c)
        return lambda t: c

    def rescale_time(self, c):
        return self

    def to_dict(self):
        return {"kind": "constant", "value": self.c}


@dataclass(frozen=True)
class Pulse(Signal):
    spec: PulseSpec

    def value(self, t):
        return eval_theta(t, self.spec)

    def derivative(self, t):
        return eval_theta_derivative(t, self.spec)

    def pulses(self):
        return [self.spec]

    def rescale_time(self, c):
        s = self.spec
        return Pulse(PulseSpec(s.t_i / c, s.t_o / c, s.epsilon * c))

    def to_dict(self):
        s = self.spec
        return {"kind": "pulse", "t_i": s.t_i, "t_o": s.t_o, "epsilon": s.epsilon}


@dataclass(frozen=True)
class Sum(Signal):
    """``offset + sum(coef * term)``."""

    offset: float = 0.0
    terms: tuple[tuple[float, Signal], ...] = field(default_factory=tuple)

    def value(self, t):
        if np.ndim(t) == 0:
            return self.offset + sum(a * s.value(t) for a, s in self.terms)
        out = self.offset + 0.0 * np.asarray(t, dtype=float)
        for a, s in self.terms:
            out = out + a * s.value(t)
        return out if np.ndim(out) else float(out)

    def derivative(self, t):
        out = 0.0 * np.asarray(t, dtype=float)
        for a, s in self.terms:
            out = out + a * s.derivative(t)
        return out if np.ndim(out) else float(out)

    def pulses(self):
        return [p for _, s in self.terms for p in s.pulses()]

    def scalar(self):
        if not all(isinstance(s, Pulse) for _, s in self.terms):
            return super().scalar()
        erf_ = math.erf
        offset = self.offset
        # 0.25 folded into the coefficient; one tuple per pulse term
        parts = tuple((0.25 * a, s.spec.epsilon, s.spec.rise, s.spec.fall) for a, s in self.terms)

        def f(t):
            v = offset
            for c, e, r, d in parts:
                v += c * (1.0 + erf_(e * (t - r))) * (1.0 + erf_(e * (d - t)))
            return v

        return f

    def rescale_time(self, c):
        return Sum(self.offset, tuple((a, s.rescale_time(c)) for a, s in self.terms))

    def to_dict(self):
        return {
            "kind": "sum",
            "offset": self.offset,
            "terms": [{"coef": a, "signal": s.to_dict()} for a, s in self.terms],
        }

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return Sum(self.offset + float(other), self.terms)
        o = _as_sum(other)
        return Sum(self.offset + o.offset, self.terms + o.terms)

    __radd__ = __add__

    def __mul__(self, c):
        c = float(c)
        return Sum(self.offset * c, tuple((a * c, s) for a, s in self.terms))

    __rmul__ = __mul__


def _as_sum(s) -> Sum:
    if isinstance(s, Sum):
        return s
    if isinstance(s, Constant):
        return Sum(float(s.c))
    if isinstance(s, (int, float)):
        return Sum(float(s))
    return Sum(0.0, ((1.0, s),))


def constant(c: float) -> Constant:
    return Constant(float(c))


def pulse(t_i: float, t_o: float, epsilon: float) -> Pulse:
    return Pulse(PulseSpec(float(t_i), float(t_o), float(epsilon)))


def eval_signal(t: ArrayLike, s: Signal) -> ArrayLike:
    return s.value(t)


def eval_signal_derivative(t: ArrayLike, s: Signal) -> ArrayLike:
    return s.derivative(t)


def signal_from_dict(d: dict[str, Any]) -> Signal:
    """Inverse of ``Signal.to_dict``."""
    kind = d.get("kind")
    if kind == "constant":
        return Constant(float(d["value"]))
    if kind == "pulse":
        return Pulse(PulseSpec(float(d["t_i"]), float(d["t_o"]), float(d["epsilon"])))
    if kind == "sum":
        terms = tuple((float(t["coef"]), signal_from_dict(t["signal"])) for t in d.get("terms", []))
        return Sum(float(d.get("offset", 0.0)), terms)
    raise ValueError(f"unknown signal kind {kind!r}")
