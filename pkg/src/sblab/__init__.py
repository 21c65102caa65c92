"""Resonance, scattering and survival numerics for the massive spin-boson model."""

from .model import ModelParams, reference_params, omega, form_factor, xi, delta_gap
from .quadrature import QuadratureConfig, PVIntegrand, integrate_adaptive, principal_value, epsilon_regularized
from .levelshift import theta, gamma_eps, gamma_boundary, gamma0_groundshift, level_shift, resonance
from .scattering import WavePacket, pair_kernel, transition_lorentzian, onshell_kernel
from .dynamics import survival_residue, survival_quadrature, survival_curve

__version__ = "0.1.0"
