"""Phase-space action of displacement, scaled rotation and squeeze.

A unitary ``U`` generated by a quadratic Hamiltonian acts on the canonical
pair as ``U^dag x U = M x + d`` with ``x = (q, p)``. For a product
``U1 U2`` the actions compose as ``x -> M1 M2 x + M1 d2 + d1``, which is
what :func:`compose` implements. Means and covariances of the evolved state
follow from the composite map.

Rotations are parametrised either by the pair ``(theta_q, theta_p)`` that
enters the exponent squared, or directly by the signed coefficients
``(a, b)`` of ``exp(-i/hbar (a q^2 + b p^2))`` via :func:`quadratic_map`.
The momentum shear in the factorised evolution needs the signed form.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np

J = np.array([[0.0, 1.0], [-1.0, 0.0]])

# below this |a b| the sinc/cos pair is evaluated from its Taylor series
_SERIES_CUTOFF = 1e-8


@dataclass(frozen=True)
class AffineSymplectic:
    M: np.ndarray
    d: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        object.__setattr__(self, "M", np.asarray(self.M, dtype=float).reshape(2, 2))
        object.__setattr__(self, "d", np.asarray(self.d, dtype=float).reshape(2))

    def apply(self, x):
        return self.M @ np.asarray(x, dtype=float) + self.d

    def symplectic_error(self) -> float:
        return float(np.max(np.abs(self.M.T @ J @ self.M - J)))

    def __matmul__(self, inner: "AffineSymplectic") -> "AffineSymplectic":
        return compose(self, inner)


IDENTITY = AffineSymplectic(np.eye(2))


def displacement_map(beta_q: float, beta_p: float) -> AffineSymplectic:
    """``D^dag q D = q + beta_q`` and ``D^dag p D = p - beta_p``."""
    return AffineSymplectic(np.eye(2), np.array([beta_q, -beta_p], dtype=float))


def _cos_sinc(x2: float) -> tuple[float, float]:
    """``(cos(2 s), sin(2 s) / (2 s))`` with ``s^2 = x2``; hyperbolic for ``x2 < 0``."""
    u = 4.0 * x2  # (2s)^2
    if abs(x2) < _SERIES_CUTOFF:
        c = 1.0 - u / 2.0 + u * u / 24.0
        sc = 1.0 - u / 6.0 + u * u / 120.0
        return c, sc
    if x2 > 0:
        z = 2.0 * math.sqrt(x2)
        return math.cos(z), math.sin(z) / z
    z = 2.0 * math.sqrt(-x2)
    return math.cosh(z), math.sinh(z) / z


def quadratic_map(a: float, b: float) -> AffineSymplectic:
    """Action of ``exp(-i/hbar (a q^2 + b p^2))`` for real ``a``, ``b`` of any sign.

    ``q -> C q + 2 b S p`` and ``p -> C p - 2 a S q`` with ``C = cos(2 sqrt(ab))``
    and ``S = sin(2 sqrt(ab)) / (2 sqrt(ab))``.
    """
    c, sc = _cos_sinc(a * b)
    M = np.array([[c, 2.0 * b * sc], [-2.0 * a * sc, c]])
    return AffineSymplectic(M)


def rotation_map(theta_q: float, theta_p: float) -> AffineSymplectic:
    """Action of ``R(theta_q, theta_p) = exp(-i/hbar (theta_q^2 q^2 + theta_p^2 p^2))``.

    With ``theta_p = 0`` this is the shear ``p -> p - 2 theta_q^2 q``.
    """
    return quadratic_map(theta_q * theta_q, theta_p * theta_p)


def squeeze_map(r: float) -> AffineSymplectic:
    return AffineSymplectic(np.diag([math.exp(2.0 * r), math.exp(-2.0 * r)]))


def compose(outer: AffineSymplectic, inner: AffineSymplectic) -> AffineSymplectic:
    """Heisenberg action of the operator product ``outer @ inner``."""
    return AffineSymplectic(outer.M @ inner.M, outer.M @ inner.d + outer.d)


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray
    phase: float = 0.0
    q0: float = 1.0
    p0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).reshape(2))
        cov = np.asarray(self.cov, dtype=float).reshape(2, 2)
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(cov)))):
            raise ValueError("covariance must be symmetric")
        if cov[0, 0] <= 0 or np.linalg.det(cov) <= 0:
            raise ValueError("covariance must be positive definite")
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @property
    def hbar(self) -> float:
        return self.q0 * self.p0

    @classmethod
    def vacuum(cls, q0: float = 1.0, p0: float = 1.0) -> "GaussianState":
        return cls(np.zeros(2), np.diag([q0 * q0 / 2, p0 * p0 / 2]), 0.0, q0, p0)

    @classmethod
    def coherent(cls, q: float, p: float, q0: float = 1.0, p0: float = 1.0) -> "GaussianState":
        return replace(cls.vacuum(q0, p0), mean=np.array([q, p], dtype=float))

    def purity_error(self) -> float:
        """Relative deviation of ``det cov`` from ``(hbar/2)^2``."""
        target = (self.hbar / 2) ** 2
        return abs(np.linalg.det(self.cov) - target) / target

    def transformed(self, A: AffineSymplectic, dphase: float = 0.0) -> "GaussianState":
        return GaussianState(A.apply(self.mean), A.M @ self.cov @ A.M.T,
                             self.phase + dphase, self.q0, self.p0)


@dataclass(frozen=True)
class LieFactors:
    """Parameters of ``e^{-iL/hbar} D(beta) R_shear(theta_q) S(r) R(phi_q, phi_p) D(beta_0)``.

    ``theta_q`` is the signed shear coefficient, ``-(m/2) rho_dot/rho``;
    ``phi_q``/``phi_p`` are the rotation parameters whose squares multiply
    ``q^2``/``p^2``. ``beta0_q`` is the leading displacement that removes
    the static offset of a drive already on at ``t = 0``.
    """

    beta_q: float = 0.0
    beta_p: float = 0.0
    theta_q: float = 0.0
    r: float = 0.0
    phi_q: float = 0.0
    phi_p: float = 0.0
    L: float = 0.0
    beta0_q: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        vals = (self.beta_q, self.beta_p, self.theta_q, self.r, self.phi_q, self.phi_p, self.L)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("Lie factors must be finite")
        if self.phi_q < 0 or self.phi_p < 0:
            raise ValueError("phi_q and phi_p must be non-negative")

    def maps(self) -> list[AffineSymplectic]:
        """Factor maps in operator-product order (leftmost first)."""
        return [
            displacement_map(self.beta_q, self.beta_p),
            quadratic_map(self.theta_q, 0.0),
            squeeze_map(self.r),
            rotation_map(self.phi_q, self.phi_p),
            displacement_map(self.beta0_q, 0.0),
        ]

    def total_map(self) -> AffineSymplectic:
        out = IDENTITY
        for A in self.maps():
            out = compose(out, A)
        return out


def assemble_factorization(erm, drv, t: float) -> LieFactors:
    """Read every factor of the evolution operator at time ``t``."""
    cfg = erm.cfg
    for s in (erm, drv):
        if not (0.0 <= t <= s.t_end):
            raise ValueError(f"t={t} outside solved window [0, {s.t_end}]")
    w0 = cfg.omega0
    beta0 = float(cfg.Omega(0.0)) * math.cos(cfg.phi) / (cfg.m * w0 * w0)
    return LieFactors(
        beta_q=float(drv.beta_q(t)),
        beta_p=float(drv.beta_p(t)),
        theta_q=float(erm.theta_q(t)),
        r=float(erm.r(t)),
        phi_q=math.sqrt(max(float(erm.phi_q2(t)), 0.0)),
        phi_p=math.sqrt(max(float(erm.phi_p2(t)), 0.0)),
        L=float(drv.L(t)),
        beta0_q=beta0,
        t=float(t),
    )


def propagate_gaussian(state0: GaussianState, f: LieFactors) -> GaussianState:
    """Evolve a Gaussian state through the composite map.

    Only the phase ``-L/hbar`` is tracked; the zero-point phase of the
    rotation factors does not enter.
    """
    return state0.transformed(f.total_map(), -f.L / state0.hbar)


def expectation_qp(state0: GaussianState, f: LieFactors) -> tuple[float, float]:
    """Closed-form ``<q(t)>``, ``<p(t)>`` written out term by term."""
    q, p = float(state0.mean[0]) + f.beta0_q, float(state0.mean[1])
    c2, sc = _cos_sinc((f.phi_q * f.phi_p) ** 2)
    # sin(2 phi_q phi_p) * phi_p/phi_q == 2 phi_p^2 * sinc, stable at phi -> 0
    s_qp = 2.0 * f.phi_p ** 2 * sc
    s_pq = 2.0 * f.phi_q ** 2 * sc
    e2, em2 = math.exp(2 * f.r), math.exp(-2 * f.r)
    shear = 2.0 * f.theta_q
    mq = (c2 * q + s_qp * p) * e2 + f.beta_q
    mp = ((c2 * em2 - shear * s_qp * e2) * p
          - (s_pq * em2 + shear * c2 * e2) * q
          - f.beta_p)
    return mq, mp


FACTORS_HEADER = ["t", "beta_q", "beta_p", "theta_q", "r", "phi_q", "phi_p", "L"]


def write_factors_csv(path, factors: Iterable[LieFactors]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FACTORS_HEADER)
        for f in factors:
            w.writerow([repr(float(getattr(f, k))) for k in FACTORS_HEADER])
