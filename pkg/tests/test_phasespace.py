import csv
import json
import math

import numpy as np
import pytest

from lieqho.liegroup import GaussianState, quadratic_map, squeeze_map
from lieqho.phasespace import (GridSpec, HusimiField, husimi_gaussian, husimi_normalization,
                               window_coverage, write_field_csv)

R_HALF_LN2 = 0.5 * math.log(2)


def squeezed(r, q0=1.0, p0=1.0):
    return GaussianState.vacuum(q0, p0).transformed(squeeze_map(r))


def five_sigma_grid(state, n=301):
    """Window of +-5 sigma around the mean, counted on the wider Q-function spread."""
    s = state.cov / np.outer([state.q0, state.p0], [state.q0, state.p0]) + 0.5 * np.eye(2)
    mu = state.mean / np.array([state.q0, state.p0])
    hq, hp = 5 * math.sqrt(s[0, 0]), 5 * math.sqrt(s[1, 1])
    return GridSpec(mu[0] - hq, mu[0] + hq, mu[1] - hp, mu[1] + hp, n, n)


class TestGridSpec:
    def test_parse(self):
        g = GridSpec.parse("-3,3,-2,2,31,21")
        assert (g.q_min, g.p_max, g.nq, g.np_) == (-3.0, 2.0, 31, 21)
        Q, P = g.mesh()
        assert Q.shape == (31, 21) and Q[1, 0] > Q[0, 0] and P[0, 1] > P[0, 0]

    @pytest.mark.parametrize("text", ["1,0,-1,1,5,5", "-1,1,-1,1,1,5", "-1,1,-1,1,5"])
    def test_rejects(self, text):
        with pytest.raises(ValueError):
            GridSpec.parse(text)


class TestHusimiGaussian:
    def test_vacuum_origin(self):
        f = husimi_gaussian(GaussianState.vacuum(), GridSpec(-1, 1, -1, 1, 3, 3))
        assert f.Q[1, 1] == pytest.approx(1 / math.pi, rel=1e-15)

    def test_vacuum_profile(self):
        f = husimi_gaussian(GaussianState.vacuum(2.0, 0.5), GridSpec(-3, 3, -3, 3, 13, 13))
        X, Y = f.grid.mesh()
        assert np.allclose(f.Q, np.exp(-(X ** 2 + Y ** 2) / 2) / math.pi, rtol=1e-14, atol=0)

    def test_peak_at_displaced_mean(self):
        g = GaussianState.coherent(1.3 * 0.7, -0.8 * 1.4, 0.7, 1.4)
        f = husimi_gaussian(g, GridSpec())
        qp, pp = f.peak()
        cell = 12 / 120
        assert abs(qp - 1.3) <= cell and abs(pp + 0.8) <= cell
        assert f.Q.max() <= 1 / math.pi + 1e-12

    def test_bounds_on_random_states(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            g = GaussianState.coherent(*rng.uniform(-2, 2, 2)).transformed(
                squeeze_map(rng.uniform(-0.6, 0.6)) @ quadratic_map(rng.uniform(-1, 1), rng.uniform(0, 1)))
            f = husimi_gaussian(g, GridSpec(nq=61, np_=61))
            assert np.all(f.Q >= 0) and f.Q.max() <= 1 / math.pi + 1e-12

    def test_squeezed_peak_below_coherent(self):
        f = husimi_gaussian(squeezed(R_HALF_LN2), GridSpec(-1, 1, -1, 1, 3, 3))
        # variances scale by e^{+-4r} = 4, 1/4: V + I/2 = diag(5/2, 5/8), sqrt(det) = 5/4
        assert f.Q[1, 1] == pytest.approx(4 / (5 * math.pi), rel=1e-14)

    def test_rotational_covariance(self):
        # a constant-frequency rotation of the state equals counter-rotating the grid
        g = GaussianState.coherent(0.9, -0.4).transformed(squeeze_map(0.3))
        rng = np.random.default_rng(4)
        for wt in (0.4, 1.7, 3.0):
            rot = quadratic_map(wt / 2, wt / 2)  # angle 2 sqrt(ab) = wt in hbar = m = w0 = 1
            pts = rng.uniform(-3, 3, (9, 2))
            back = pts @ np.linalg.inv(rot.M).T
            for (x, y), (u, v) in zip(pts, back):
                a = husimi_gaussian(g.transformed(rot), GridSpec(x, x + 1, y, y + 1, 2, 2)).Q[0, 0]
                b = husimi_gaussian(g, GridSpec(u, u + 1, v, v + 1, 2, 2)).Q[0, 0]
                assert abs(a - b) <= 1e-10

    def test_rejects_bad_covariance(self):
        with pytest.raises(ValueError):
            GaussianState(np.zeros(2), np.diag([1.0, -1.0]))


class TestNormalization:
    def test_vacuum(self):
        f = husimi_gaussian(GaussianState.vacuum(), GridSpec(-6, 6, -6, 6, 241, 241))
        assert abs(husimi_normalization(f) - 1) <= 1e-6

    def test_vacuum_with_units(self):
        g = GaussianState.vacuum(3.0, 0.25)
        f = husimi_gaussian(g, GridSpec(-6, 6, -6, 6, 241, 241))
        assert abs(husimi_normalization(f) - 1) <= 1e-6

    @pytest.mark.parametrize("r", [R_HALF_LN2, -R_HALF_LN2])
    def test_squeezed_five_sigma(self, r):
        g = squeezed(r)
        assert abs(husimi_normalization(husimi_gaussian(g, five_sigma_grid(g))) - 1) <= 1e-5

    def test_window_coverage(self):
        assert window_coverage(GaussianState.vacuum(), GridSpec()) == pytest.approx(6.0)
        g = squeezed(R_HALF_LN2)
        assert window_coverage(g, five_sigma_grid(g)) == pytest.approx(5.0)
        assert window_coverage(g, GridSpec()) < 5.0

    def test_truncated_window_loses_mass(self):
        f = husimi_gaussian(GaussianState.vacuum(), GridSpec(0, 6, -6, 6, 121, 241))
        assert husimi_normalization(f) < 0.6


def test_field_csv_and_sidecar(tmp_path):
    grid = GridSpec(-1, 1, -2, 2, 3, 2)
    f = husimi_gaussian(GaussianState.vacuum(), grid)
    path = tmp_path / "q.csv"
    write_field_csv(path, HusimiField(grid, f.Q, {"protocol": "squeeze"}), {"t": 1.5})
    raw = path.read_bytes()
    assert b"\r\n" not in raw
    rows = list(csv.reader(raw.decode().splitlines()))
    assert rows[0] == ["q_over_q0", "p_over_p0", "Q"]
    assert len(rows) == 1 + 6
    # row-major: q is the slow index
    assert [float(v) for v in rows[1][:2]] == [-1.0, -2.0]
    assert [float(v) for v in rows[2][:2]] == [-1.0, 2.0]
    assert float(rows[3][2]) == f.Q[1, 0]
    meta = json.loads((tmp_path / "q.json").read_text())
    assert meta["grid"]["nq"] == 3 and meta["protocol"] == "squeeze" and meta["t"] == 1.5
