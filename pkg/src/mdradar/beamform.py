"""Delay-and-sum spatial filtering for the uniform linear array."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import RadarParams
from .scene import RawDataCube, element_phases


@dataclass(frozen=True)
class SteeringVector:
    """Plane-wave phase progression across the array for one azimuth."""

    angle_deg: float
    values: np.ndarray


@dataclass(frozen=True)
class BeamWeights:
    """Conjugate-steering weights pointing the beam at ``look_angle_deg``."""

    look_angle_deg: float
    weights: np.ndarray


def _check_angle(angle_deg: float) -> None:
    if not 0.0 < angle_deg < 180.0:
        raise ValueError(
            f"look angle must lie in (0, 180) degrees, got {angle_deg}"
        )


def steering_vector(angle_deg: float, params: RadarParams) -> SteeringVector:
    _check_angle(angle_deg)
    return SteeringVector(angle_deg, element_phases(angle_deg, params))


def beam_weights(look_angle_deg: float, params: RadarParams) -> BeamWeights:
    sv = steering_vector(look_angle_deg, params)
    return BeamWeights(look_angle_deg, np.conj(sv.values))


def beamform(cube: RawDataCube, look_angle_deg: float) -> np.ndarray:
    """Combine array elements toward the look angle.

    Output sample n is ``sum_m s(n, m) * conj(a_m(look))``; a source exactly
    at the look angle gains a factor of the element count. No normalization
    is applied — downstream stages are scale-invariant.
    """
    w = beam_weights(look_angle_deg, cube.params).weights
    if cube.samples.shape[1] != w.shape[0]:
        raise ValueError(
            f"cube has {cube.samples.shape[1]} element columns, "
            f"params expect {w.shape[0]}"
        )
    return cube.samples @ w
