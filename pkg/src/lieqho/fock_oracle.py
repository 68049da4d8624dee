"""Brute-force reference: Schrodinger evolution in a truncated number basis.

Nothing here depends on the Ermakov machinery; the oracle only shares the
oscillator configuration and the signals.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .dynamics import OscillatorConfig
from .phasespace import GridSpec, HusimiField


class TruncationError(RuntimeError):
    def __init__(self, t: float, level: int, population: float):
        super().__init__(
            f"Fock truncation breached at t={t!r}: population {population:.3e} "
            f"in levels >= {level}; increase N"
        )
        self.t, self.level, self.population = t, level, population


def _ladder(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


@dataclass(frozen=True)
class FockBasis:
    N: int
    q0: float
    p0: float
    q: np.ndarray
    p: np.ndarray
    q2: np.ndarray
    p2: np.ndarray
    qp_sym: np.ndarray  # {q, p}

    @property
    def hbar(self) -> float:
        return self.q0 * self.p0

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.N, dtype=complex)
        v[0] = 1.0
        return v

    def number_state(self, n: int) -> np.ndarray:
        v = np.zeros(self.N, dtype=complex)
        v[n] = 1.0
        return v


def build_basis(N: int, q0: float = 1.0, p0: float = 1.0) -> FockBasis:
    """Canonical operators in the lowest ``N`` number states.

    Quadratic operators are built two levels larger and cropped, so their
    matrix elements are exact rather than products of truncated matrices.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    n = N + 2
    a = _ladder(n)
    ad = a.conj().T
    q = q0 / math.sqrt(2) * (a + ad)
    p = 1j * p0 / math.sqrt(2) * (ad - a)
    crop = lambda A: np.ascontiguousarray(A[:N, :N])
    return FockBasis(N, q0, p0, crop(q), crop(p), crop(q @ q), crop(p @ p),
                     crop(q @ p + p @ q))


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


def algebra_table(basis: FockBasis) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """The eight commutation relations as ``(label, lhs, rhs)`` matrix pairs."""
    q, p, q2, p2, s = basis.q, basis.p, basis.q2, basis.p2, basis.qp_sym
    ih = 1j * basis.hbar
    eye = np.eye(basis.N)
    return [
        ("[q,p] = i hbar", commutator(q, p), ih * eye),
        ("[q,p^2] = 2i hbar p", commutator(q, p2), 2 * ih * p),
        ("[p,q^2] = -2i hbar q", commutator(p, q2), -2 * ih * q),
        ("[q^2,p^2] = 2i hbar {q,p}", commutator(q2, p2), 2 * ih * s),
        ("[{q,p},q] = -2i hbar q", commutator(s, q), -2 * ih * q),
        ("[{q,p},p] = 2i hbar p", commutator(s, p), 2 * ih * p),
        ("[{q,p},q^2] = -4i hbar q^2", commutator(s, q2), -4 * ih * q2),
        ("[{q,p},p^2] = 4i hbar p^2", commutator(s, p2), 4 * ih * p2),
    ]


def hamiltonian(basis: FockBasis, cfg: OscillatorConfig, t: float) -> np.ndarray:
    w = float(cfg.omega(t))
    f = float(cfg.force(t))
    return basis.p2 / (2 * cfg.m) + 0.5 * cfg.m * w * w * basis.q2 + f * basis.q


@dataclass(frozen=True)
class DtPolicy:
    """Step size ``min(2 pi / (steps_per_period * w_max), ramp_step / epsilon)`` near ramps."""

    steps_per_period: int = 200
    ramp_step: float = 0.3
    order: int = 4
    check_every: int = 25

    def __post_init__(self):
        if self.order not in (2, 4):
            raise ValueError("order must be 2 or 4")


def _step_grid(cfg: OscillatorConfig, t_end: float, samples: np.ndarray, policy: DtPolicy):
    probe = np.linspace(0.0, t_end, 4001)
    w_max = max(float(np.max(np.asarray(cfg.omega(probe)))), cfg.omega_d, cfg.omega0)
    base = 2 * math.pi / (policy.steps_per_period * w_max)
    # ramp windows carry max_step 0.3/epsilon; rescale to this policy's ramp_step
    windows = [(a, b, s * policy.ramp_step / 0.3) for a, b, s in cfg.ramp_windows()]
    cuts = {0.0, float(t_end), *map(float, samples)}
    for a, b, _ in windows:
        cuts.update(c for c in (a, b) if 0.0 < c < t_end)
    cuts = sorted(cuts)
    grid = [0.0]
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        h = base
        for wa, wb, ws in windows:
            if wa <= mid <= wb:
                h = min(h, ws)
        n = max(1, math.ceil((b - a) / h - 1e-9))
        grid.extend(np.linspace(a, b, n + 1)[1:].tolist())
    grid = np.array(grid)
    grid[-1] = t_end
    return grid


_G = math.sqrt(3) / 6


@dataclass
class FockTrajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), N)
    basis: FockBasis
    n_steps: int = 0

    def final(self) -> np.ndarray:
        return self.states[-1]


def evolve(state: np.ndarray, cfg: OscillatorConfig, basis: FockBasis, t_end: float,
           samples: Optional[Sequence[float]] = None, policy: DtPolicy = DtPolicy()) -> FockTrajectory:
    """Unitary stepping with Magnus exponentials from ``t = 0`` to ``t_end``.

    Order 2 uses the midpoint Hamiltonian; order 4 adds the commutator of
    the two Gauss-point Hamiltonians. Propagators are cached on the exact
    Hamiltonian parameters, so plateaus cost one exponential each.
    """
    samples = np.array(sorted(set([0.0, float(t_end)] + [float(s) for s in ([] if samples is None else samples)])))
    if samples[0] < 0 or samples[-1] > t_end:
        raise ValueError("sample times must lie in [0, t_end]")
    grid = _step_grid(cfg, t_end, samples, policy)
    psi = np.array(state, dtype=complex)
    hbar = basis.hbar
    P2 = basis.p2 / (2 * cfg.m)
    Q2 = 0.5 * cfg.m * basis.q2
    Qm = basis.q
    top = basis.N - max(1, basis.N // 10)
    cache: dict = {}

    def gen(w, f):
        return P2 + (w * w) * Q2 + f * Qm

    out_t, out_s = [0.0], [psi.copy()]
    k_sample = 1
    for k, (a, b) in enumerate(zip(grid[:-1], grid[1:])):
        h = b - a
        if policy.order == 2:
            tm = a + 0.5 * h
            key = (float(cfg.omega(tm)), float(cfg.force(tm)), h)
            U = cache.get(key)
            if U is None:
                U = expm(-1j * h / hbar * gen(key[0], key[1]))
                cache[key] = U
        else:
            t1, t2 = a + (0.5 - _G) * h, a + (0.5 + _G) * h
            key = (float(cfg.omega(t1)), float(cfg.force(t1)),
                   float(cfg.omega(t2)), float(cfg.force(t2)), h)
            U = cache.get(key)
            if U is None:
                H1, H2 = gen(key[0], key[1]), gen(key[2], key[3])
                # A = -iH/hbar; Omega = h/2 (A1 + A2) + sqrt(3)/12 h^2 [A2, A1]
                Om = (-0.5j * h / hbar) * (H1 + H2) - (math.sqrt(3) / 12) * h * h / hbar ** 2 * commutator(H2, H1)
                U = expm(Om)
                cache[key] = U
        if len(cache) > 4096:
            cache.clear()
        psi = U @ psi
        if k % policy.check_every == 0 or k_sample < len(samples) and abs(b - samples[k_sample]) < 1e-12:
            pop = float(np.sum(np.abs(psi[top:]) ** 2))
            if pop > 1e-8:
                raise TruncationError(float(b), top, pop)
        while k_sample < len(samples) and b >= samples[k_sample] - 1e-12:
            out_t.append(float(samples[k_sample]))
            out_s.append(psi.copy())
            k_sample += 1
    return FockTrajectory(np.array(out_t), np.array(out_s), basis, len(grid) - 1)


def _expect(A: np.ndarray, psi: np.ndarray) -> float:
    return float(np.real(np.vdot(psi, A @ psi)))


def observables(psi: np.ndarray, basis: FockBasis) -> tuple[float, float, float, float, float]:
    """``(<q>, <p>, Var q, Var p, Cov(q,p))`` with the symmetrised covariance."""
    mq, mp = _expect(basis.q, psi), _expect(basis.p, psi)
    vq = _expect(basis.q2, psi) - mq * mq
    vp = _expect(basis.p2, psi) - mp * mp
    cqp = 0.5 * _expect(basis.qp_sym, psi) - mq * mp
    return mq, mp, vq, vp, cqp


def mean_cov(psi: np.ndarray, basis: FockBasis) -> tuple[np.ndarray, np.ndarray]:
    mq, mp, vq, vp, c = observables(psi, basis)
    return np.array([mq, mp]), np.array([[vq, c], [c, vp]])


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ValueError("states must share the basis dimension")
    return float(min(1.0, abs(np.vdot(a, b))))


def norm(psi: np.ndarray) -> float:
    return float(np.linalg.norm(psi))


def displacement_op(basis: FockBasis, beta_q: float, beta_p: float) -> np.ndarray:
    return expm(-1j / basis.hbar * (beta_p * basis.q + beta_q * basis.p))


def quadratic_op(basis: FockBasis, a: float, b: float) -> np.ndarray:
    """``exp(-i/hbar (a q^2 + b p^2))``."""
    return expm(-1j / basis.hbar * (a * basis.q2 + b * basis.p2))


def squeeze_op(basis: FockBasis, r: float) -> np.ndarray:
    return expm(-1j / basis.hbar * r * basis.qp_sym)


def factorized_state(basis: FockBasis, factors, psi0: Optional[np.ndarray] = None) -> np.ndarray:
    """Apply the factor product to ``psi0`` (vacuum by default) in the number basis."""
    psi = basis.vacuum() if psi0 is None else np.array(psi0, dtype=complex)
    ops = [
        displacement_op(basis, factors.beta0_q, 0.0),
        quadratic_op(basis, factors.phi_q ** 2, factors.phi_p ** 2),
        squeeze_op(basis, factors.r),
        quadratic_op(basis, factors.theta_q, 0.0),
        displacement_op(basis, factors.beta_q, factors.beta_p),
    ]
    for U in ops:
        psi = U @ psi
    return psi * np.exp(-1j * factors.L / basis.hbar)


def husimi_fock(psi: np.ndarray, basis: FockBasis, grid: GridSpec) -> HusimiField:
    """``Q = |<alpha|psi>|^2 / pi`` summed term by term over the number basis."""
    X, Y = grid.mesh()
    alpha_c = (X - 1j * Y) / math.sqrt(2)  # conj(alpha)
    term = np.exp(-0.5 * np.abs(alpha_c) ** 2).astype(complex)
    amp = term * psi[0]
    for n in range(1, basis.N):
        term = term * alpha_c / math.sqrt(n)
        amp = amp + term * psi[n]
    return HusimiField(grid, np.abs(amp) ** 2 / math.pi)


COMPARISON_HEADER = ["t", "mean_q", "mean_p", "var_q", "var_p", "cov_qp", "fidelity_vs_factorized"]


def write_comparison_csv(path, rows: Iterable[Sequence[float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COMPARISON_HEADER)
        for row in rows:
            w.writerow([repr(float(x)) for x in row])
