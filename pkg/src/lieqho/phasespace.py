"""Husimi Q-function grids for Gaussian states."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .liegroup import GaussianState


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid in units of ``q0`` and ``p0``."""

    q_min: float = -6.0
    q_max: float = 6.0
    p_min: float = -6.0
    p_max: float = 6.0
    nq: int = 121
    np_: int = 121

    def __post_init__(self):
        if not (self.q_min < self.q_max and self.p_min < self.p_max):
            raise ValueError("grid ranges must satisfy min < max")
        if self.nq < 2 or self.np_ < 2:
            raise ValueError("grid needs at least 2 points per axis")

    @property
    def q_axis(self) -> np.ndarray:
        return np.linspace(self.q_min, self.q_max, self.nq)

    @property
    def p_axis(self) -> np.ndarray:
        return np.linspace(self.p_min, self.p_max, self.np_)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(Q, P)`` arrays of shape ``(nq, np)`` with ``q`` varying along rows."""
        return np.meshgrid(self.q_axis, self.p_axis, indexing="ij")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse ``qmin,qmax,pmin,pmax,nq,np``."""
        parts = [s.strip() for s in text.split(",")]
        if len(parts) != 6:
            raise ValueError("grid must be 'qmin,qmax,pmin,pmax,nq,np'")
        a, b, c, d = (float(x) for x in parts[:4])
        return cls(a, b, c, d, int(parts[4]), int(parts[5]))

    def to_dict(self) -> dict:
        return {"q_min": self.q_min, "q_max": self.q_max, "p_min": self.p_min,
                "p_max": self.p_max, "nq": self.nq, "np": self.np_}


@dataclass(frozen=True)
class HusimiField:
    grid: GridSpec
    Q: np.ndarray
    meta: dict = field(default_factory=dict)

    def peak(self) -> tuple[float, float]:
        i, j = np.unravel_index(int(np.argmax(self.Q)), self.Q.shape)
        return float(self.grid.q_axis[i]), float(self.grid.p_axis[j])


def husimi_gaussian(state: GaussianState, grid: GridSpec) -> HusimiField:
    """Closed-form Q function of a Gaussian state on ``grid``.

    In the normalised quadratures ``x = q/q0``, ``y = p/p0`` the Q function is
    twice the normal density with covariance ``V + I/2``, where ``V`` is the
    state covariance in the same units; ``2 * (1/2pi) = 1/pi`` at the vacuum.
    """
    scale = np.array([state.q0, state.p0])
    mu = state.mean / scale
    V = state.cov / np.outer(scale, scale)
    S = V + 0.5 * np.eye(2)
    det = float(np.linalg.det(S))
    if not (S[0, 0] > 0 and det > 0):
        raise ValueError("covariance is not positive definite")
    Si = np.linalg.inv(S)
    X, Y = grid.mesh()
    dx, dy = X - mu[0], Y - mu[1]
    quad = Si[0, 0] * dx * dx + 2 * Si[0, 1] * dx * dy + Si[1, 1] * dy * dy
    Q = np.exp(-0.5 * quad) / (math.pi * math.sqrt(det))
    Q = np.where(Q < 0, 0.0, Q)
    return HusimiField(grid, Q)


def husimi_normalization(field: HusimiField) -> float:
    """Trapezoid integral of ``Q dq dp / (2 hbar)``; close to 1 when the grid covers the state."""
    g = field.grid
    # dq dp / (2 hbar) == dx dy / 2 in q0/p0 units
    inner = trapezoid(field.Q, g.p_axis, axis=1)
    return float(trapezoid(inner, g.q_axis) / 2.0)


def window_coverage(state: GaussianState, grid: GridSpec) -> float:
    """Distance from the mean to the nearest window edge, in standard deviations of Q.

    Normalization is only expected to reach 1 within 1e-5 when this is at least 5.
    """
    scale = np.array([state.q0, state.p0])
    mu = state.mean / scale
    S = state.cov / np.outer(scale, scale) + 0.5 * np.eye(2)
    sq, sp = math.sqrt(S[0, 0]), math.sqrt(S[1, 1])
    return float(min((mu[0] - grid.q_min) / sq, (grid.q_max - mu[0]) / sq,
                     (mu[1] - grid.p_min) / sp, (grid.p_max - mu[1]) / sp))


def write_field_csv(path, field: HusimiField, sidecar: dict | None = None) -> None:
    """Row-major CSV plus a JSON sidecar next to it."""
    X, Y = field.grid.mesh()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["q_over_q0", "p_over_p0", "Q"])
        for x, y, v in zip(X.ravel(), Y.ravel(), field.Q.ravel()):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(v))])
    meta = {"grid": field.grid.to_dict(), **field.meta, **(sidecar or {})}
    with open(str(path).rsplit(".", 1)[0] + ".json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
