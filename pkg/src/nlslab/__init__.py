"""Spectral lab for soliton propagation in slowly varying NLS media.

A library plus CLI for simulating i u_t + Delta u + a(eps*x)|u|^(m-1)u = 0
on periodic grids, extracting modulation parameters, integrating the
reduced parameter dynamics, and verifying the quantitative predictions
(transmission scaling, reflection threshold, correction-profile systems,
residual scaling) at desk scale.
"""

__version__ = "0.1.0"

from .grids import Grid, Field, make_grid
from .potentials import PotentialSpec, validate_hypotheses
from .solitons import (
    ScalingExponents,
    SolitonParams,
    exponents,
    soliton_profile,
    scale_derivative,
    traveling_wave,
    ground_state_2d,
    check_identities,
)
from .effective import EffectiveState, OutcomePrediction, predict_outcome

__all__ = [
    "EffectiveState",
    "OutcomePrediction",
    "predict_outcome",
    "__version__",
    "Grid",
    "Field",
    "make_grid",
    "PotentialSpec",
    "validate_hypotheses",
    "ScalingExponents",
    "SolitonParams",
    "exponents",
    "soliton_profile",
    "scale_derivative",
    "traveling_wave",
    "ground_state_2d",
    "check_identities",
]
