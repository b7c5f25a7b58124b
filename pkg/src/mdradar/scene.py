"""Synthetic multi-person radar scenes with ground-truth activity labels.

A scene is a set of point-scatterer motion episodes observed by a uniform
linear array. Each episode contributes, per pulse, a dechirped beat tone at
the range-proportional frequency, a pulse-to-pulse phase that encodes radial
motion as Doppler, and the inter-element phase progression of its azimuth.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .params import SPEED_OF_LIGHT, RadarParams, offset_to_azimuth


class ActivityClass(enum.Enum):
    """The nine recognizable activities; enum order fixes the one-hot index."""

    BEND_DOWN_0 = "BendDown0"
    SIT_DOWN_0 = "SitDown0"
    STAND_UP_0 = "StandUp0"
    WALK_BACK_0 = "WalkBack0"
    WALK_BACK_M30 = "WalkBackM30"
    WALK_BACK_P30 = "WalkBackP30"
    WALK_FORWARD_0 = "WalkForward0"
    WALK_FORWARD_P30 = "WalkForwardP30"
    WALK_FORWARD_M30 = "WalkForwardM30"

    @property
    def index(self) -> int:
        return _CLASS_INDEX[self]

    @property
    def offset_deg(self) -> int:
        """Nominal look-direction offset from broadside for this class."""
        if self.name.endswith("_P30"):
            return 30
        if self.name.endswith("_M30"):
            return -30
        return 0

    @property
    def motion(self) -> str:
        """Underlying motion kind, independent of azimuth."""
        if self.name.startswith("WALK_FORWARD"):
            return "walk_forward"
        if self.name.startswith("WALK_BACK"):
            return "walk_back"
        if self.name.startswith("BEND"):
            return "bend_down"
        if self.name.startswith("SIT"):
            return "sit_down"
        return "stand_up"

    @classmethod
    def from_value(cls, value: str) -> "ActivityClass":
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown activity class {value!r}") from None


_CLASS_INDEX = {c: i for i, c in enumerate(ActivityClass)}
NUM_CLASSES = len(ActivityClass)


@dataclass
class ScattererTrack:
    """One point scatterer: complex amplitude plus sampled radial motion."""

    amplitude: complex
    ranges: np.ndarray     # meters at each time sample
    velocities: np.ndarray  # dr/dt, same length

    def __post_init__(self) -> None:
        self.ranges = np.asarray(self.ranges, dtype=np.float64)
        self.velocities = np.asarray(self.velocities, dtype=np.float64)
        if self.ranges.shape != self.velocities.shape:
            raise ValueError("ranges and velocities must have equal length")
        if np.any(self.ranges <= 0):
            raise ValueError("scatterer range must stay positive")


# Motion profile constants (m, m/s, Hz). Chosen so peak radial speed stays
# below the unambiguous limit wavelength/(4*pri) ~ 0.97 m/s at 77 GHz / 1 ms.
WALK_SPEED = 0.5
WALK_SPEED_FLOOR = 0.05  # fraction of walk speed kept at the ramp edges
LIMB_SPEED = 0.3
GAIT_FREQ = 1.8
LIMB_RANGE_OFFSET = 0.05
TORSO_AMPLITUDE = 1.0
LIMB_AMPLITUDE = 0.45

# In-place excursions: (signed displacement amplitude, time skew exponent).
# Negative displacement moves toward the radar. The skew exponent shifts the
# excursion early (<1) or late (>1) within the event.
_INPLACE_SHAPE = {
    "bend_down": (-0.20, 1.0),
    "sit_down": (0.32, 0.75),
    "stand_up": (-0.34, 1.35),
}
_INPLACE_LIMB_SCALE = 0.65  # limb excursion relative to torso, sharper lobe


def _num_steps(duration: float, dt: float) -> int:
    n = duration / dt
    if abs(n - round(n)) > 1e-6:
        raise ValueError(f"dt={dt} does not divide duration={duration}")
    return int(round(n))


def _cumtrapz(v: np.ndarray, dt: float) -> np.ndarray:
    out = np.empty_like(v)
    out[0] = 0.0
    np.cumsum((v[1:] + v[:-1]) * (0.5 * dt), out=out[1:])
    return out


def activity_profile(
    activity: ActivityClass,
    duration: float,
    dt: float,
    *,
    initial_range: float = 2.0,
    walk_speed: float = WALK_SPEED,
    gait_freq: float = GAIT_FREQ,
    limb_speed: float = LIMB_SPEED,
    scale: float = 1.0,
) -> list[ScattererTrack]:
    """Build torso + limb radial trajectories for one activity episode.

    Returns tracks sampled at ``t = 0, dt, ..., duration`` inclusive.
    Walking classes translate with a smoothly ramped speed (forward =
    decreasing range) plus a sinusoidal limb oscillation at ``gait_freq``;
    in-place classes make a transient excursion and return to the start
    range. ``scale`` jitters the excursion/speed amplitude.
    """
    if duration <= 0 or dt <= 0:
        raise ValueError("duration and dt must be positive")
    if initial_range <= 0:
        raise ValueError("initial_range must be positive")
    n = _num_steps(duration, dt)
    t = np.arange(n + 1) * dt
    u = t / duration

    motion = activity.motion
    if motion in ("walk_forward", "walk_back"):
        sign = -1.0 if motion == "walk_forward" else 1.0
        speed = scale * walk_speed * (
            WALK_SPEED_FLOOR + (1.0 - WALK_SPEED_FLOOR) * np.sin(np.pi * u) ** 2
        )
        v_torso = sign * speed
        r_torso = initial_range + _cumtrapz(v_torso, dt)
        v_limb = v_torso + scale * limb_speed * np.sin(2 * np.pi * gait_freq * t)
        r_limb = initial_range + LIMB_RANGE_OFFSET + _cumtrapz(v_limb, dt)
        return [
            ScattererTrack(TORSO_AMPLITUDE, r_torso, v_torso),
            ScattererTrack(LIMB_AMPLITUDE, r_limb, v_limb),
        ]

    amp, skew = _INPLACE_SHAPE[motion]
    amp = amp * scale
    lobe = np.sin(np.pi * u**skew) ** 2
    r_torso = initial_range + amp * lobe
    r_limb = initial_range + LIMB_RANGE_OFFSET + amp * _INPLACE_LIMB_SCALE * lobe**2
    v_torso = np.gradient(r_torso, dt)
    v_limb = np.gradient(r_limb, dt)
    return [
        ScattererTrack(TORSO_AMPLITUDE, r_torso, v_torso),
        ScattererTrack(LIMB_AMPLITUDE, r_limb, v_limb),
    ]


@dataclass
class PersonMotion:
    """One person performing one activity episode at a fixed azimuth.

    The scatterer tracks cover pulses ``[start_pulse, end_pulse)``; outside
    that window the episode contributes nothing.
    """

    azimuth_deg: float
    initial_range: float
    activity: ActivityClass
    scatterers: list[ScattererTrack]
    start_pulse: int = 0
    end_pulse: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.azimuth_deg < 180.0:
            raise ValueError(
                f"azimuth must lie in (0, 180) degrees, got {self.azimuth_deg}"
            )
        if self.initial_range <= 0:
            raise ValueError("initial_range must be positive")
        if not self.scatterers:
            raise ValueError("at least one scatterer required")
        n = self.end_pulse - self.start_pulse if self.end_pulse is not None else None
        for s in self.scatterers:
            if n is not None and len(s.ranges) < n:
                raise ValueError("scatterer track shorter than the pulse window")


@dataclass(frozen=True)
class GroundTruthEvent:
    """Label metadata emitted alongside a synthesized cube."""

    azimuth_deg: float
    offset_deg: int
    initial_range: float
    activity: ActivityClass
    start_pulse: int
    end_pulse: int

    def to_dict(self) -> dict:
        return {
            "azimuth_deg": self.azimuth_deg,
            "offset_deg": self.offset_deg,
            "initial_range": self.initial_range,
            "activity": self.activity.value,
            "start_pulse": self.start_pulse,
            "end_pulse": self.end_pulse,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruthEvent":
        return cls(
            azimuth_deg=float(d["azimuth_deg"]),
            offset_deg=int(d["offset_deg"]),
            initial_range=float(d["initial_range"]),
            activity=ActivityClass.from_value(d["activity"]),
            start_pulse=int(d["start_pulse"]),
            end_pulse=int(d["end_pulse"]),
        )


@dataclass
class RawDataCube:
    """Complex samples of shape (num_samples, num_elements) plus labels."""

    samples: np.ndarray
    params: RadarParams
    ground_truth: list[GroundTruthEvent] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples)
        n, m = self.params.num_samples, self.params.num_elements
        if self.samples.shape != (n, m):
            raise ValueError(
                f"cube shape {self.samples.shape} != expected ({n}, {m})"
            )
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("cube contains non-finite samples")


def element_phases(azimuth_deg: float, params: RadarParams) -> np.ndarray:
    """Per-element plane-wave phase factors for a source at the azimuth."""
    theta = math.radians(azimuth_deg)
    step = 2.0 * np.pi / params.wavelength * params.element_spacing * math.cos(theta)
    return np.exp(1j * step * np.arange(params.num_elements))


def synthesize_cube(
    persons: list[PersonMotion],
    params: RadarParams,
    seed: int,
) -> RawDataCube:
    """Render motion episodes into a raw data cube.

    Each scatterer places, per pulse q, a fast-time beat tone at
    ``2 * B * r(t_q) / (c * pri)`` and a slow-time phase ``-4*pi*r(t_q)/lam``
    so that an approaching target (decreasing range) maps to positive
    Doppler. Complex Gaussian noise of the configured variance is added per
    sample; the same seed reproduces the cube bit for bit.
    """
    p = params.samples_per_pulse
    q = params.num_pulses
    m = params.num_elements
    lam = params.wavelength
    fast_idx = np.arange(p)

    data = np.zeros((q, p, m), dtype=np.complex128)
    truth: list[GroundTruthEvent] = []
    for person in persons:
        q0 = person.start_pulse
        q1 = person.end_pulse if person.end_pulse is not None else q
        if not 0 <= q0 < q1 <= q:
            raise ValueError(
                f"pulse window [{q0}, {q1}) outside cube of {q} pulses"
            )
        steer = element_phases(person.azimuth_deg, params)
        for scat in person.scatterers:
            r = scat.ranges[: q1 - q0]
            beat = 2.0 * params.bandwidth * r / (SPEED_OF_LIGHT * params.pri)
            phase = (
                2.0 * np.pi * np.outer(beat / params.adc_rate, fast_idx)
                - (4.0 * np.pi / lam) * r[:, None]
            )
            tone = scat.amplitude * np.exp(1j * phase)
            data[q0:q1] += tone[:, :, None] * steer[None, None, :]
        truth.append(
            GroundTruthEvent(
                azimuth_deg=person.azimuth_deg,
                offset_deg=person.activity.offset_deg,
                initial_range=person.initial_range,
                activity=person.activity,
                start_pulse=q0,
                end_pulse=q1,
            )
        )

    samples = data.reshape(p * q, m)
    if params.noise_variance > 0:
        rng = np.random.default_rng(seed)
        sigma = math.sqrt(params.noise_variance / 2.0)
        samples = samples + sigma * (
            rng.standard_normal(samples.shape)
            + 1j * rng.standard_normal(samples.shape)
        )

    truth.sort(key=lambda e: (e.start_pulse, e.offset_deg))
    _check_truth(truth, q)
    return RawDataCube(samples=samples, params=params, ground_truth=truth)


def _check_truth(truth: list[GroundTruthEvent], num_pulses: int) -> None:
    by_azimuth: dict[float, list[GroundTruthEvent]] = {}
    for ev in truth:
        if not 0 <= ev.start_pulse < ev.end_pulse <= num_pulses:
            raise ValueError("ground-truth boundaries outside the cube")
        by_azimuth.setdefault(ev.azimuth_deg, []).append(ev)
    for events in by_azimuth.values():
        for a, b in zip(events, events[1:]):
            if b.start_pulse < a.end_pulse:
                raise ValueError("overlapping episodes for one person")
