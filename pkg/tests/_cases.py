"""Random draws shared by the property tests and the acceptance suite."""

import math

from lieqho.liegroup import GaussianState, LieFactors


def random_case(rng):
    """A factor set and a start state sharing one (m, w0, hbar).

    The rotation pair is built the way the Ermakov solution builds it, from
    a single integral of rho^-2, so phi_q / phi_p = m w0. Drawing the two
    independently would hide an arbitrary extra squeeze in the rotation.
    Squeezing is bounded to the protocols' range with margin; far stronger
    squeezing makes the 2x2 determinant itself ill-conditioned.
    """
    m, w0, hbar = rng.uniform(0.3, 3), rng.uniform(0.3, 3), rng.uniform(0.3, 3)
    q0, p0 = math.sqrt(hbar / (m * w0)), math.sqrt(hbar * m * w0)
    integral = m * rng.uniform(0, 8)  # = m w0 t at constant frequency, w0 t up to 8
    f = LieFactors(
        beta_q=rng.uniform(-3, 3) * q0, beta_p=rng.uniform(-3, 3) * p0,
        theta_q=rng.uniform(-1, 1) * m * w0, r=rng.uniform(-0.6, 0.6),
        phi_q=math.sqrt(0.5 * w0 * integral), phi_p=math.sqrt(integral / (2 * m * m * w0)),
        L=rng.uniform(-5, 5) * hbar, beta0_q=rng.uniform(-1, 1) * q0,
    )
    g = GaussianState.coherent(rng.uniform(-2, 2) * q0, rng.uniform(-2, 2) * p0, q0, p0)
    return f, g


def fd(f, t, h):
    """Five-point centered difference."""
    return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h)
