"""Side-by-side runs of the factorized path and the Fock oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import fock_oracle as fo
from .dynamics import (DEFAULT_ATOL, DEFAULT_RTOL, DriveSolution, ErmakovSolution,
                       OscillatorConfig, solve_drive, solve_ermakov)
from .liegroup import GaussianState, LieFactors, assemble_factorization, propagate_gaussian

MEAN_TOL = 1e-4
COV_RTOL = 1e-3
DEFAULT_N = 128


@dataclass
class FactorizedRun:
    cfg: OscillatorConfig
    erm: ErmakovSolution
    drv: DriveSolution
    times: np.ndarray
    factors: list[LieFactors]
    states: list[GaussianState]


def run_factorized(cfg: OscillatorConfig, t_end: float, times: Sequence[float],
                   rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> FactorizedRun:
    erm = solve_ermakov(cfg, t_end, rtol, atol)
    drv = solve_drive(cfg, t_end, rtol, atol)
    g0 = GaussianState.vacuum(cfg.q0, cfg.p0)
    ts = np.asarray(times, dtype=float)
    factors = [assemble_factorization(erm, drv, float(t)) for t in ts]
    return FactorizedRun(cfg, erm, drv, ts, factors, [propagate_gaussian(g0, f) for f in factors])


def cov_rel_error(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius-norm relative difference of two covariance matrices."""
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


@dataclass
class Comparison:
    times: np.ndarray
    rows: list[tuple]  # oracle observables + fidelity vs factorized
    mean_delta: np.ndarray  # (n, 2) in q0/p0 units
    cov_rel: np.ndarray
    fidelity_vs_factorized: np.ndarray
    end_fidelity_vs_initial: float
    n_steps: int
    mean_tol: float = MEAN_TOL
    cov_rtol: float = COV_RTOL
    fidelity_min: Optional[float] = None
    breaches: list[str] = field(default_factory=list)

    @property
    def max_mean_delta(self) -> float:
        return float(np.max(self.mean_delta))

    @property
    def max_cov_rel(self) -> float:
        return float(np.max(self.cov_rel))

    @property
    def passed(self) -> bool:
        return not self.breaches

    def summary(self) -> dict:
        return {
            "max_mean_delta": self.max_mean_delta,
            "max_cov_rel_delta": self.max_cov_rel,
            "min_fidelity_vs_factorized": float(np.min(self.fidelity_vs_factorized)),
            "end_fidelity_vs_initial": self.end_fidelity_vs_initial,
            "thresholds": {"mean_tol": self.mean_tol, "cov_rtol": self.cov_rtol,
                           "fidelity_min": self.fidelity_min},
            "oracle_steps": self.n_steps,
            "breaches": list(self.breaches),
            "passed": self.passed,
        }


def compare_paths(cfg: OscillatorConfig, t_end: float, times: Sequence[float],
                  N: int = DEFAULT_N, policy: fo.DtPolicy = fo.DtPolicy(),
                  rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
                  fidelity_min: Optional[float] = None, mean_tol: float = MEAN_TOL,
                  cov_rtol: float = COV_RTOL, factorized: Optional[FactorizedRun] = None) -> Comparison:
    """Run both paths from the ground state and compare at every sample time.

    Raises :class:`fock_oracle.TruncationError` when the basis is too small.
    """
    ts = np.array(sorted(set(float(t) for t in times) | {0.0, float(t_end)}))
    fac = factorized
    if fac is None or not np.array_equal(fac.times, ts):
        fac = run_factorized(cfg, t_end, ts, rtol, atol)
    basis = fo.build_basis(N, cfg.q0, cfg.p0)
    traj = fo.evolve(basis.vacuum(), cfg, basis, t_end, ts, policy)
    scale = np.array([cfg.q0, cfg.p0])
    rows, dm, dc, fid = [], [], [], []
    for t, psi, f, g in zip(traj.times, traj.states, fac.factors, fac.states):
        mean, cov = fo.mean_cov(psi, basis)
        F = fo.fidelity(psi, fo.factorized_state(basis, f))
        dm.append(np.abs(mean - g.mean) / scale)
        dc.append(cov_rel_error(cov, g.cov))
        fid.append(F)
        rows.append((t, mean[0], mean[1], cov[0, 0], cov[1, 1], cov[0, 1], F))
    end_fid = fo.fidelity(traj.final(), basis.vacuum())
    cmp = Comparison(ts, rows, np.array(dm), np.array(dc), np.array(fid), end_fid,
                     traj.n_steps, mean_tol, cov_rtol, fidelity_min)
    if cmp.max_mean_delta > mean_tol:
        i = int(np.argmax(np.max(cmp.mean_delta, axis=1)))
        cmp.breaches.append(f"mean delta {cmp.max_mean_delta:.3e} > {mean_tol:g} at t={float(ts[i])!r}")
    if cmp.max_cov_rel > cov_rtol:
        i = int(np.argmax(cmp.cov_rel))
        cmp.breaches.append(f"covariance delta {cmp.max_cov_rel:.3e} > {cov_rtol:g} at t={float(ts[i])!r}")
    if fidelity_min is not None and end_fid < fidelity_min:
        cmp.breaches.append(f"end fidelity {end_fid:.6f} < {fidelity_min:g}")
    return cmp


def end_state_contract(state: GaussianState, mean_tol: float = 1e-3, cov_rtol: float = 1e-3) -> tuple[float, float, bool]:
    """Distance of a factorized end state from the vacuum: ``(mean, cov_rel, ok)``."""
    vac = GaussianState.vacuum(state.q0, state.p0)
    dmean = float(np.max(np.abs(state.mean) / np.array([state.q0, state.p0])))
    dcov = cov_rel_error(state.cov, vac.cov)
    return dmean, dcov, dmean <= mean_tol and dcov <= cov_rtol
