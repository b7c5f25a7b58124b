"""Radar front-end constants and the shared parameter record."""

from __future__ import annotations

from dataclasses import dataclass, field

SPEED_OF_LIGHT = 299792458.0

# Look directions offered by the pipeline, as offsets from broadside (degrees).
LOOK_OFFSETS = (0, 30, -30)


class ConfigError(ValueError):
    """Invalid configuration (CLI exit code 2)."""


class DataError(RuntimeError):
    """Missing or malformed data artifact (CLI exit code 3)."""


def offset_to_azimuth(offset_deg: float) -> float:
    """Convert a user-facing offset from broadside to the internal azimuth.

    Broadside is 90 deg; positive offsets rotate toward 0 deg, so +30 maps
    to 60 deg and -30 maps to 120 deg.
    """
    return 90.0 - float(offset_deg)


def azimuth_to_offset(azimuth_deg: float) -> float:
    return 90.0 - float(azimuth_deg)


def look_tag(offset_deg: float) -> str:
    """Stable filename tag for a look offset: 0 -> 'b', +30 -> 'p30', -30 -> 'm30'."""
    off = int(round(offset_deg))
    if off == 0:
        return "b"
    return ("p" if off > 0 else "m") + str(abs(off))


@dataclass(frozen=True)
class RadarParams:
    """Static parameters of the FMCW front end and receive array.

    The fast-time sample count per pulse is not stored; it is pinned to
    ``adc_rate * pri`` and must come out integral.
    """

    carrier_freq: float = 77e9
    bandwidth: float = 4e9
    pri: float = 1e-3
    adc_rate: float = 512e3
    num_pulses: int = 12000
    num_elements: int = 4
    element_spacing: float | None = None  # defaults to half a wavelength
    noise_variance: float = 1.0

    def __post_init__(self) -> None:
        for name in ("carrier_freq", "bandwidth", "pri", "adc_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.num_pulses < 1 or self.num_elements < 1:
            raise ValueError("num_pulses and num_elements must be >= 1")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")
        p = self.adc_rate * self.pri
        if abs(p - round(p)) > 1e-6 * max(p, 1.0):
            raise ValueError(
                f"adc_rate * pri = {p} is not an integer sample count"
            )
        if self.element_spacing is None:
            object.__setattr__(self, "element_spacing", self.wavelength / 2.0)
        if self.element_spacing <= 0:
            raise ValueError("element_spacing must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq

    @property
    def samples_per_pulse(self) -> int:
        return int(round(self.adc_rate * self.pri))

    @property
    def num_samples(self) -> int:
        return self.samples_per_pulse * self.num_pulses

    @property
    def range_bin_resolution(self) -> float:
        """Meters spanned by one fast-time DFT bin."""
        return (
            SPEED_OF_LIGHT
            / (2.0 * self.bandwidth)
            * (self.adc_rate * self.pri / self.samples_per_pulse)
        )

    @property
    def duration(self) -> float:
        return self.num_pulses * self.pri

    def beat_frequency(self, range_m: float) -> float:
        """Dechirped beat frequency of a point target at the given range."""
        return 2.0 * self.bandwidth * range_m / (SPEED_OF_LIGHT * self.pri)

    def to_dict(self) -> dict:
        return {
            "carrier_freq": self.carrier_freq,
            "bandwidth": self.bandwidth,
            "pri": self.pri,
            "adc_rate": self.adc_rate,
            "num_pulses": self.num_pulses,
            "num_elements": self.num_elements,
            "element_spacing": self.element_spacing,
            "noise_variance": self.noise_variance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RadarParams":
        known = {
            "carrier_freq",
            "bandwidth",
            "pri",
            "adc_rate",
            "num_pulses",
            "num_elements",
            "element_spacing",
            "noise_variance",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown radar parameter(s): {sorted(unknown)}")
        return cls(**d)
