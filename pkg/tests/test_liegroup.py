import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lieqho import fock_oracle as fo
from lieqho.dynamics import OscillatorConfig, solve_drive, solve_ermakov
from lieqho.liegroup import (IDENTITY, J, AffineSymplectic, GaussianState, LieFactors,
                             assemble_factorization, compose, displacement_map,
                             expectation_qp, propagate_gaussian, quadratic_map, rotation_map,
                             squeeze_map, write_factors_csv)
from lieqho.signals import Constant, pulse

from _cases import random_case

PI = math.pi


class TestMaps:
    def test_displacement_signs(self):
        x = displacement_map(0.4, 0.7).apply([1.0, 2.0])
        assert np.allclose(x, [1.4, 1.3])

    def test_shear_limit(self):
        M = quadratic_map(0.3, 0.0).M
        assert np.array_equal(M, np.array([[1.0, 0.0], [-0.6, 1.0]]))
        M = rotation_map(0.3, 0.0).M
        assert np.allclose(M, [[1.0, 0.0], [-0.18, 1.0]], atol=1e-15)

    def test_series_branch_is_continuous(self):
        # across the 1e-8 cutoff the series and the direct form agree
        for x in (0.99e-8, 1.01e-8, -0.99e-8, -1.01e-8):
            a = math.copysign(math.sqrt(abs(x)), x)
            A = quadratic_map(a, math.sqrt(abs(x))).M
            z = 2 * math.sqrt(abs(x))
            c = math.cos(z) if x > 0 else math.cosh(z)
            assert A[0, 0] == pytest.approx(c, abs=1e-15)

    def test_hyperbolic_branch_matches_fock(self):
        basis = fo.build_basis(40)
        a, b = -0.05, 0.08
        U = fo.quadratic_op(basis, a, b)
        g = GaussianState.vacuum()
        psi = U @ basis.vacuum()
        mean, cov = fo.mean_cov(psi, basis)
        h = g.transformed(quadratic_map(a, b))
        assert np.allclose(cov, h.cov, atol=1e-12)

    def test_rotation_by_quarter_period(self):
        # theta_q^2 = theta_p^2 = 1/2 hbar units: 2 sqrt(ab) = pi/2 for a = b = pi/4
        M = quadratic_map(PI / 4, PI / 4).M
        assert np.allclose(M, [[0, 1], [-1, 0]], atol=1e-15)

    def test_group_sanity(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            bq, bp, r = rng.normal(size=3)
            D = compose(displacement_map(bq, bp), displacement_map(-bq, -bp))
            S = compose(squeeze_map(r), squeeze_map(-r))
            for A in (D, S):
                assert np.max(np.abs(A.M - np.eye(2))) <= 1e-12
                assert np.max(np.abs(A.d)) <= 1e-12
        assert np.array_equal((IDENTITY @ IDENTITY).M, np.eye(2))

    def test_compose_matches_sequential_application(self):
        rng = np.random.default_rng(2)
        A = AffineSymplectic(quadratic_map(0.3, 0.8).M, rng.normal(size=2))
        B = AffineSymplectic(squeeze_map(0.2).M, rng.normal(size=2))
        x = rng.normal(size=2)
        assert np.allclose((A @ B).apply(x), A.apply(B.apply(x)), atol=1e-14)

    def test_J(self):
        assert np.array_equal(J, [[0, 1], [-1, 0]])


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_random_factor_properties(seed):
    f, g0 = random_case(np.random.default_rng(seed))
    A = f.total_map()
    assert A.symplectic_error() <= 1e-12 * max(1.0, np.max(np.abs(A.M)) ** 2)
    g = propagate_gaussian(g0, f)
    assert g.purity_error() <= 1e-10
    mq, mp = expectation_qp(g0, f)
    assert abs(mq - g.mean[0]) <= 1e-12 * max(1.0, abs(mq))
    assert abs(mp - g.mean[1]) <= 1e-12 * max(1.0, abs(mp))
    assert g.phase == pytest.approx(g0.phase - f.L / g0.hbar)


class TestFactorization:
    def test_identity_factors_leave_state(self):
        g = GaussianState.coherent(0.3, -0.2, 1.5, 0.8)
        h = propagate_gaussian(g, LieFactors())
        assert np.array_equal(h.mean, g.mean) and np.array_equal(h.cov, g.cov)

    def test_zero_mean_stays_zero(self):
        cfg = OscillatorConfig(omega=1.0 + pulse(1, 3, 20.0))
        erm, drv = solve_ermakov(cfg, 6.0), solve_drive(cfg, 6.0)
        for t in np.linspace(0, 6, 13):
            assert expectation_qp(GaussianState.vacuum(), assemble_factorization(erm, drv, t)) == (0.0, 0.0)

    def test_t0_is_identity(self):
        cfg = OscillatorConfig(omega=1.0 + pulse(1, 3, 20.0), Omega=pulse(0.5, 2, 20.0))
        f = assemble_factorization(solve_ermakov(cfg, 4.0), solve_drive(cfg, 4.0), 0.0)
        A = f.total_map()
        assert np.max(np.abs(A.M - np.eye(2))) < 1e-12 and np.max(np.abs(A.d)) < 1e-12

    @pytest.mark.parametrize("m,w0", [(1.0, 1.0), (2.0, 0.6), (0.5, 1.7)])
    def test_constant_frequency_reduces_to_rotation(self, m, w0):
        cfg = OscillatorConfig(omega=Constant(w0), m=m)
        t_end = 4 * PI / w0
        erm, drv = solve_ermakov(cfg, t_end), solve_drive(cfg, t_end)
        q1 = 0.7 * cfg.q0
        g0 = GaussianState.coherent(q1, 0.0, cfg.q0, cfg.p0)
        for t in np.linspace(0, t_end, 41):
            f = assemble_factorization(erm, drv, t)
            assert 2 * f.phi_q * f.phi_p == pytest.approx(w0 * t, abs=1e-10)
            if t > 0:
                assert f.phi_q / f.phi_p == pytest.approx(m * w0, rel=1e-10)
            A = f.total_map()
            R = np.array([[math.cos(w0 * t), math.sin(w0 * t) / (m * w0)],
                          [-m * w0 * math.sin(w0 * t), math.cos(w0 * t)]])
            assert np.max(np.abs(A.M - R)) < 1e-10
            mq, mp = expectation_qp(g0, f)
            assert mq == pytest.approx(q1 * math.cos(w0 * t), abs=1e-10)
            assert mp == pytest.approx(-m * w0 * q1 * math.sin(w0 * t), abs=1e-10)

    def test_driven_constant_frequency_mean(self):
        # mean = rotated initial mean + (beta_q, -beta_p)
        W = 0.3
        cfg = OscillatorConfig(omega=Constant(1.0), Omega=Constant(W), omega_d=0.7, phi=0.4)
        erm, drv = solve_ermakov(cfg, 8.0), solve_drive(cfg, 8.0)
        g0 = GaussianState.vacuum()
        for t in (1.0, 4.0, 8.0):
            f = assemble_factorization(erm, drv, t)
            mq, mp = expectation_qp(g0, f)
            b0 = f.beta0_q
            assert mq == pytest.approx(b0 * math.cos(t) + f.beta_q, abs=1e-10)
            assert mp == pytest.approx(-b0 * math.sin(t) - f.beta_p, abs=1e-10)

    def test_window_error(self):
        cfg = OscillatorConfig(omega=Constant(1.0))
        with pytest.raises(ValueError):
            assemble_factorization(solve_ermakov(cfg, 1.0), solve_drive(cfg, 1.0), 2.0)

    def test_invalid_factors(self):
        with pytest.raises(ValueError):
            LieFactors(phi_q=-1.0)
        with pytest.raises(ValueError):
            LieFactors(r=float("nan"))


@pytest.fixture(scope="module")
def sheared():
    """State mid-way through a pulse, where the momentum shear is large."""
    cfg = OscillatorConfig(omega=1.0 + pulse(0.5, 6.0, 10.0))
    t = 1.9
    erm, drv = solve_ermakov(cfg, t), solve_drive(cfg, t)
    f = assemble_factorization(erm, drv, t)
    basis = fo.build_basis(64)
    traj = fo.evolve(basis.vacuum(), cfg, basis, t)
    return f, fo.mean_cov(traj.final(), basis)[1]


def test_shear_uses_signed_theta_q(sheared):
    f, cov_oracle = sheared
    assert abs(f.theta_q) > 0.05
    g0 = GaussianState.vacuum()
    signed = propagate_gaussian(g0, f).cov
    assert np.max(np.abs(signed - cov_oracle)) < 1e-8


def test_squared_shear_slot_disagrees_with_oracle(sheared):
    # with theta_q^2 in the shear slot the covariance misses the oracle badly
    f, cov_oracle = sheared
    maps = f.maps()
    maps[1] = rotation_map(f.theta_q, 0.0)
    A = IDENTITY
    for B in maps:
        A = A @ B
    literal = GaussianState.vacuum().transformed(A).cov
    assert np.max(np.abs(literal - cov_oracle)) > 1e-2


def test_factors_csv(tmp_path):
    rows = [LieFactors(t=0.0), LieFactors(beta_q=0.1, theta_q=-0.2, r=0.3, phi_q=0.4, phi_p=0.5, L=0.6, t=1.5)]
    path = tmp_path / "f.csv"
    write_factors_csv(path, rows)
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    lines = list(csv.reader(raw.decode().splitlines()))
    assert lines[0] == ["t", "beta_q", "beta_p", "theta_q", "r", "phi_q", "phi_p", "L"]
    assert [float(x) for x in lines[2]] == [1.5, 0.1, 0.0, -0.2, 0.3, 0.4, 0.5, 0.6]
