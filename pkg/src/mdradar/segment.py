"""Event extraction from extended micro-Doppler images.

Per-frame percentile envelopes reduce the image to a central Doppler track;
a short-average/long-average trigger ratio detects activity onsets and ends;
detected intervals are widened by pre/post margins, cropped out, zero-padded
onto a square canvas, and resized for the classifier.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .tfproc import Spectrogram

LOWER_FRACTION = 0.03
CENTRAL_FRACTION = 0.50
UPPER_FRACTION = 0.97
MARGIN_DIVISOR = 20  # pre/post event margin = event length / 20
RATIO_GUARD = 1e-9
CANVAS_SIZE = 600
OUTPUT_SIZE = 128
SMOOTH_TIME_RADIUS = 2
SMOOTH_FREQ_RADIUS = 2


@dataclass
class EnvelopeSet:
    """Per-frame percentile crossings (frequency-bin indices) and intensity."""

    upper: np.ndarray
    central: np.ndarray
    lower: np.ndarray
    intensity: np.ndarray


@dataclass(frozen=True)
class TriggerConfig:
    """Detector windows and thresholds.

    ``sigma1``/``sigma3`` gate the short average on and off, ``sigma2``
    gates the short/long ratio. ``margin_frames`` overrides the default
    length/20 pre/post margins when positive.
    """

    n_short: int = 8
    n_long: int = 32
    sigma1: float = 3.0
    sigma2: float = 2.0
    sigma3: float = 2.0
    margin_frames: int = 0

    def __post_init__(self) -> None:
        if not self.n_short < self.n_long:
            raise ValueError("n_short must be smaller than n_long")
        if not (self.sigma1 > self.sigma3 > 0):
            raise ValueError("thresholds must satisfy sigma1 > sigma3 > 0")
        if self.sigma2 <= 1:
            raise ValueError("sigma2 must exceed 1")
        if self.margin_frames < 0:
            raise ValueError("margin_frames must be >= 0")


@dataclass(frozen=True)
class EventInterval:
    """Detected event: margin-extended [start, end) around raw trigger times."""

    start: int
    end: int
    raw_start: int
    raw_end: int

    def __post_init__(self) -> None:
        if not self.start <= self.raw_start < self.raw_end <= self.end:
            raise ValueError(f"inconsistent interval {self}")

    @property
    def width(self) -> int:
        return self.end - self.start


@dataclass
class PaddedImage:
    """Classifier-ready crop: 128 x 128 x 3 with identical channel planes."""

    pixels: np.ndarray
    source_id: str
    interval: EventInterval


def smooth_power(
    power: np.ndarray,
    time_radius: int = SMOOTH_TIME_RADIUS,
    freq_radius: int = SMOOTH_FREQ_RADIUS,
) -> np.ndarray:
    """Box-average the power image before envelope extraction.

    Raw spectrogram pixels are exponentially distributed on noise-only
    frames, which makes the median envelope wander; a small edge-padded
    box mean tightens it without moving the signal blob.
    """
    out = np.asarray(power, dtype=np.float64)
    for axis, radius in ((0, freq_radius), (1, time_radius)):
        if radius <= 0:
            continue
        k = 2 * radius + 1
        pad_spec = [(radius, radius) if ax == axis else (0, 0) for ax in range(2)]
        padded = np.pad(out, pad_spec, mode="edge")
        csum = np.cumsum(padded, axis=axis)
        zero = np.zeros_like(np.take(csum, [0], axis=axis))
        csum = np.concatenate([zero, csum], axis=axis)
        hi = np.take(csum, np.arange(k, csum.shape[axis]), axis=axis)
        lo = np.take(csum, np.arange(0, csum.shape[axis] - k), axis=axis)
        out = (hi - lo) / k
    return out


def _crossings(power: np.ndarray, fraction: float, fallback: int) -> np.ndarray:
    """Smallest row where the per-column cumulative sum reaches the fraction
    of the column total; silent columns fall back to the given row."""
    cum = np.cumsum(power, axis=0)
    total = cum[-1]
    idx = np.empty(power.shape[1], dtype=np.int64)
    for n in range(power.shape[1]):
        idx[n] = np.searchsorted(cum[:, n], fraction * total[n], side="left")
    silent = total <= 0
    idx[silent] = fallback
    return idx


def envelopes(spec: Spectrogram) -> EnvelopeSet:
    """Lower/central/upper percentile envelopes of each frame.

    For frame n with cumulative power C(k) over frequency, the envelope at
    fraction q is the smallest bin k with ``C(k) >= q * I(n)`` where I(n) is
    the frame's total intensity. Frames with zero intensity collapse to the
    zero-Doppler center row.
    """
    power = spec.power
    if power.shape[1] < 1:
        raise ValueError("spectrogram has no frames")
    center = spec.center_row
    return EnvelopeSet(
        upper=_crossings(power, UPPER_FRACTION, center),
        central=_crossings(power, CENTRAL_FRACTION, center),
        lower=_crossings(power, LOWER_FRACTION, center),
        intensity=power.sum(axis=0),
    )


def central_envelope_avg(spec: Spectrogram) -> np.ndarray:
    """Average of the two central envelopes accumulated from opposite ends.

    The forward envelope accumulates power from the lowest frequency bin up,
    the backward one from the highest bin down; averaging the two crossings
    per frame cancels the bias noise puts on a one-sided median.
    """
    power = spec.power
    if power.shape[1] < 1:
        raise ValueError("spectrogram has no frames")
    center = spec.center_row
    fwd = _crossings(power, CENTRAL_FRACTION, center)
    k = power.shape[0]
    bwd_flipped = _crossings(power[::-1], CENTRAL_FRACTION, k - 1 - center)
    bwd = k - 1 - bwd_flipped
    return 0.5 * (fwd + bwd)


def trigger_signal(central: np.ndarray, center_row: int) -> np.ndarray:
    """Doppler-offset magnitude driving the trigger: |central - center_row|."""
    return np.abs(np.asarray(central, dtype=np.float64) - center_row)


def sta_lta(
    signal: np.ndarray,
    n_short: int,
    n_long: int,
    guard: float = RATIO_GUARD,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forward short average, backward long average, and their ratio.

    ``sta[n]`` averages ``signal[n+1 .. n+n_short]``; ``lta[n]`` averages
    ``signal[n-n_long .. n]`` (inclusive, normalized by ``n_long``). Values
    are defined for ``n in [n_long, T - n_short - 1]`` and NaN elsewhere;
    the ratio divides by ``lta + guard`` to stay finite on silent windows.
    """
    sig = np.asarray(signal, dtype=np.float64)
    t = sig.size
    if n_short + n_long + 1 > t:
        raise ValueError(
            f"windows n_short={n_short}, n_long={n_long} need more than "
            f"{t} samples"
        )
    cum = np.concatenate(([0.0], np.cumsum(sig)))
    sta = np.full(t, np.nan)
    lta = np.full(t, np.nan)
    n = np.arange(n_long, t - n_short)
    sta[n] = (cum[n + n_short + 1] - cum[n + 1]) / n_short
    lta[n] = (cum[n + 1] - cum[n - n_long]) / n_long
    ratio = sta / (lta + guard)
    return sta, lta, ratio


def merge_intervals(intervals: list[EventInterval]) -> list[EventInterval]:
    """Merge overlapping extended intervals; idempotent."""
    if not intervals:
        return []
    ordered = sorted(intervals, key=lambda e: (e.start, e.end))
    merged = [ordered[0]]
    for ev in ordered[1:]:
        last = merged[-1]
        if ev.start < last.end:
            merged[-1] = EventInterval(
                start=last.start,
                end=max(last.end, ev.end),
                raw_start=min(last.raw_start, ev.raw_start),
                raw_end=max(last.raw_end, ev.raw_end),
            )
        else:
            merged.append(ev)
    return merged


def detect_events(signal: np.ndarray, cfg: TriggerConfig) -> list[EventInterval]:
    """Run the trigger state machine over a nonnegative activity signal.

    An event opens when the short average exceeds ``sigma1`` while the
    short/long ratio exceeds ``sigma2``, and closes when the short average
    falls below ``sigma3`` with the ratio below ``sigma2``. Events still
    open at the end of the signal close there. Each raw interval is then
    widened by the pre/post margin (length/20 unless overridden), clamped
    to the signal, and overlapping results are merged.
    """
    sig = np.asarray(signal, dtype=np.float64)
    t = sig.size
    sta, _, ratio = sta_lta(sig, cfg.n_short, cfg.n_long)
    events: list[EventInterval] = []
    raw_start: int | None = None
    for n in range(cfg.n_long, t - cfg.n_short):
        if raw_start is None:
            if sta[n] > cfg.sigma1 and ratio[n] > cfg.sigma2:
                raw_start = n
        elif sta[n] < cfg.sigma3 and ratio[n] < cfg.sigma2:
            events.append(_extend(raw_start, n, t, cfg))
            raw_start = None
    if raw_start is not None:
        events.append(_extend(raw_start, t, t, cfg))
    return merge_intervals(events)


def _extend(raw_start: int, raw_end: int, t: int, cfg: TriggerConfig) -> EventInterval:
    margin = cfg.margin_frames
    if margin == 0:
        margin = (raw_end - raw_start) // MARGIN_DIVISOR
    return EventInterval(
        start=max(0, raw_start - margin),
        end=min(t, raw_end + margin),
        raw_start=raw_start,
        raw_end=raw_end,
    )


def calibrate_trigger(
    noise_signal: np.ndarray,
    n_short: int = 8,
    n_long: int = 32,
    sigma2: float = 2.0,
) -> TriggerConfig:
    """Set thresholds from a motion-free stretch of the trigger signal.

    With noise mean mu and spread s, the on threshold is ``mu + 3 s`` and
    the off threshold ``mu + 2 s``.
    """
    sig = np.asarray(noise_signal, dtype=np.float64)
    if sig.size < n_short + n_long + 2:
        raise ValueError("calibration signal too short for the windows")
    mu = float(sig.mean())
    s = float(sig.std())
    if s <= 0:
        s = max(mu, 1.0) * 0.05
    return TriggerConfig(
        n_short=n_short,
        n_long=n_long,
        sigma1=mu + 3.0 * s,
        sigma2=sigma2,
        sigma3=mu + 2.0 * s,
    )


def bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel centers and edge clamping."""
    in_h, in_w = image.shape
    ys = (np.arange(out_h) + 0.5) * in_h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * in_w / out_w - 0.5
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, in_h - 1)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    top = image[np.ix_(y0, x0)]
    top = top + (image[np.ix_(y0, x1)] - top) * wx
    bot = image[np.ix_(y1, x0)]
    bot = bot + (image[np.ix_(y1, x1)] - bot) * wx
    return top + (bot - top) * wy


def crop_pad_resize(
    image: np.ndarray,
    interval: EventInterval,
    source_id: str = "",
    canvas_size: int = CANVAS_SIZE,
    output_size: int = OUTPUT_SIZE,
) -> PaddedImage:
    """Cut the event columns out, center on a zero canvas, resize, replicate.

    The crop keeps all frequency rows and the frames in
    ``[interval.start, interval.end)``. It is centered on a
    ``canvas_size``-square zero canvas (error if it does not fit), resized
    bilinearly to ``output_size``, and replicated into 3 identical channels.
    """
    image = np.asarray(image, dtype=np.float64)
    h, t = image.shape
    if not 0 <= interval.start < interval.end <= t:
        raise ValueError(f"interval {interval} outside image of {t} frames")
    crop = image[:, interval.start : interval.end]
    ch, cw = crop.shape
    if ch > canvas_size or cw > canvas_size:
        raise ValueError(
            f"crop {ch}x{cw} for interval {interval} exceeds the "
            f"{canvas_size}x{canvas_size} canvas"
        )
    canvas = np.zeros((canvas_size, canvas_size))
    y0 = (canvas_size - ch) // 2
    x0 = (canvas_size - cw) // 2
    canvas[y0 : y0 + ch, x0 : x0 + cw] = crop
    small = bilinear_resize(canvas, output_size, output_size)
    pixels = np.repeat(small[:, :, None], 3, axis=2).astype(np.float32)
    return PaddedImage(pixels=pixels, source_id=source_id, interval=interval)
