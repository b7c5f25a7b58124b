"""Range processing and micro-Doppler spectrogram formation.

The beamformed sample stream is cut into per-pulse columns, DFT'd along fast
time into a range map, collapsed over the range bins of interest, and turned
into a sliding-window Doppler spectrogram with zero Doppler centered.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import RadarParams

DEFAULT_WINDOW_LEN = 128
DEFAULT_HOP = 93  # 12000 slow-time samples -> exactly 128 frames
DEFAULT_DYNAMIC_RANGE_DB = 60.0
RANGE_WINDOW_M = (0.5, 4.0)


@dataclass
class PulseMatrix:
    """Fast time x slow time complex samples, one column per pulse."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ValueError("pulse matrix must be 2-D")


@dataclass
class RangeMap:
    """Column-wise DFT of a pulse matrix; rows index range bins."""

    values: np.ndarray
    bin_resolution: float = 0.0


@dataclass
class SlowTimeSignal:
    """Range-collapsed complex signal, one sample per pulse."""

    values: np.ndarray
    r_lo: int = 0
    r_hi: int = 0


@dataclass
class Spectrogram:
    """Nonnegative power over Doppler (rows) and frame time (columns)."""

    power: np.ndarray
    window: np.ndarray
    hop: int
    frame_times: np.ndarray
    freq_axis: np.ndarray

    def __post_init__(self) -> None:
        if self.power.shape[0] != len(self.window):
            raise ValueError("frequency bin count must equal window length")

    @property
    def num_frames(self) -> int:
        return self.power.shape[1]

    @property
    def center_row(self) -> int:
        return self.power.shape[0] // 2


def reshape_pulses(x: np.ndarray, samples_per_pulse: int) -> PulseMatrix:
    """Stack consecutive blocks of ``samples_per_pulse`` samples as columns."""
    x = np.asarray(x)
    p = int(samples_per_pulse)
    if p < 1:
        raise ValueError("samples_per_pulse must be >= 1")
    if x.ndim != 1 or x.size % p != 0:
        raise ValueError(
            f"vector of length {x.size} is not divisible into pulses of {p}"
        )
    return PulseMatrix(x.reshape(-1, p).T)


def flatten_pulses(pm: PulseMatrix) -> np.ndarray:
    """Inverse of :func:`reshape_pulses`."""
    return pm.values.T.reshape(-1)


def range_map(pm: PulseMatrix, params: RadarParams | None = None) -> RangeMap:
    """Per-pulse DFT over fast time (exponent ``exp(-2j*pi*l*p/P)``)."""
    res = params.range_bin_resolution if params is not None else 0.0
    return RangeMap(np.fft.fft(pm.values, axis=0), bin_resolution=res)


def range_window_bins(
    params: RadarParams,
    r_min: float = RANGE_WINDOW_M[0],
    r_max: float = RANGE_WINDOW_M[1],
) -> tuple[int, int]:
    """Bin indices covering ``[r_min, r_max]`` meters, clamped to the map."""
    res = params.range_bin_resolution
    lo = max(0, int(np.floor(r_min / res)))
    hi = min(params.samples_per_pulse - 1, int(np.ceil(r_max / res)))
    return lo, hi


def collapse_range(rm: RangeMap, r_lo: int, r_hi: int) -> SlowTimeSignal:
    """Sum range rows ``r_lo..r_hi`` inclusive into one slow-time signal."""
    p = rm.values.shape[0]
    if not 0 <= r_lo <= r_hi < p:
        raise ValueError(
            f"range bin window [{r_lo}, {r_hi}] invalid for {p} bins"
        )
    return SlowTimeSignal(rm.values[r_lo : r_hi + 1].sum(axis=0), r_lo, r_hi)


def hann_window(length: int) -> np.ndarray:
    """Periodic Hann taper."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)


def spectrogram(
    v: SlowTimeSignal | np.ndarray,
    window: np.ndarray | None = None,
    hop: int = DEFAULT_HOP,
    dt: float = 1e-3,
) -> Spectrogram:
    """Sliding windowed-DFT power of a slow-time signal.

    Frame t covers samples ``[t*hop, t*hop + H)``; each frame is tapered,
    DFT'd, squared, and fftshifted so zero Doppler sits on the center row.
    """
    values = v.values if isinstance(v, SlowTimeSignal) else np.asarray(v)
    if window is None:
        window = hann_window(DEFAULT_WINDOW_LEN)
    window = np.asarray(window, dtype=np.float64)
    h = len(window)
    if hop < 1:
        raise ValueError("hop must be >= 1")
    if h > values.size:
        raise ValueError(
            f"window of {h} samples exceeds signal of {values.size}"
        )
    frames = np.lib.stride_tricks.sliding_window_view(values, h)[::hop]
    spec = np.fft.fft(frames * window[None, :], axis=1)
    power = np.fft.fftshift(np.abs(spec) ** 2, axes=1).T
    t = np.arange(power.shape[1])
    return Spectrogram(
        power=power,
        window=window,
        hop=int(hop),
        frame_times=(t * hop + h / 2.0) * dt,
        freq_axis=(np.arange(h) - h // 2) / (h * dt),
    )


def to_image(
    spec: Spectrogram | np.ndarray,
    dynamic_range_db: float = DEFAULT_DYNAMIC_RANGE_DB,
) -> np.ndarray:
    """Log-scale power to [0, 1] relative to the image-wide peak.

    Power is expressed in dB below the maximum, clipped to the dynamic
    range, and mapped affinely so the peak is 1. An all-zero input stays
    all-zero; positive rescaling of the input leaves the output unchanged.
    """
    if dynamic_range_db <= 0:
        raise ValueError("dynamic_range_db must be positive")
    power = spec.power if isinstance(spec, Spectrogram) else np.asarray(spec)
    peak = power.max(initial=0.0)
    if peak <= 0:
        return np.zeros_like(power, dtype=np.float64)
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(power / peak)
    return np.clip(db, -dynamic_range_db, 0.0) / dynamic_range_db + 1.0
