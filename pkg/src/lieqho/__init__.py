"""Factorized evolution of the driven, time-dependent quantum harmonic oscillator."""

__version__ = "0.1.0"

from .dynamics import OscillatorConfig, find_events, solve_drive, solve_ermakov
from .liegroup import (AffineSymplectic, GaussianState, LieFactors, assemble_factorization,
                       compose, displacement_map, expectation_qp, propagate_gaussian,
                       quadratic_map, rotation_map, squeeze_map)
from .phasespace import GridSpec, HusimiField, husimi_gaussian, husimi_normalization
from .protocols import (Protocol, build_protocol, displacement_protocol, optimize_mirror_time,
                        single_pulse_return, squeeze_protocol, train_protocol)
from .signals import Constant, Pulse, PulseSpec, Sum, constant, pulse
