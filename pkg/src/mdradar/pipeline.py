"""End-to-end orchestration: scenes -> beams -> spectrograms -> events ->
labeled crops -> trained classifier -> report, with a hashed manifest.

The run is composed of restartable stages that communicate only through
files, so re-running a stage from its on-disk inputs reproduces the full
run bit for bit. Every random choice derives from the run seed and no
artifact embeds timestamps; a config + seed pair therefore maps to a
byte-identical output tree.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from .beamform import beamform
from .nnet import LabeledExample, TrainConfig, evaluate, split_by_class, train
from .params import (
    LOOK_OFFSETS,
    ConfigError,
    DataError,
    RadarParams,
    look_tag,
    offset_to_azimuth,
)
from .scene import (
    ActivityClass,
    GroundTruthEvent,
    PersonMotion,
    RawDataCube,
    activity_profile,
    synthesize_cube,
)
from .segment import (
    EventInterval,
    TriggerConfig,
    calibrate_trigger,
    central_envelope_avg,
    crop_pad_resize,
    detect_events,
    envelopes,
    smooth_power,
    trigger_signal,
)
from .tfproc import (
    DEFAULT_DYNAMIC_RANGE_DB,
    DEFAULT_HOP,
    DEFAULT_WINDOW_LEN,
    RANGE_WINDOW_M,
    Spectrogram,
    collapse_range,
    hann_window,
    range_map,
    range_window_bins,
    reshape_pulses,
    spectrogram,
    to_image,
)

OUTPUT_ROOT_ENV = "MDRADAR_OUTPUT_ROOT"

# Default per-class event counts: recorded trial proportions scaled down
# (divisor 40) with a floor of 2 so every class can train.
DEFAULT_CLASS_COUNTS = {
    ActivityClass.BEND_DOWN_0: 3,
    ActivityClass.SIT_DOWN_0: 3,
    ActivityClass.STAND_UP_0: 2,
    ActivityClass.WALK_BACK_0: 12,
    ActivityClass.WALK_BACK_M30: 2,
    ActivityClass.WALK_BACK_P30: 2,
    ActivityClass.WALK_FORWARD_0: 19,
    ActivityClass.WALK_FORWARD_P30: 2,
    ActivityClass.WALK_FORWARD_M30: 2,
}

# Scene timing (seconds): quiet lead-in long enough for the long trigger
# window to settle, then one event slot per activity. In two-person cubes
# the second person's slot grid is staggered so simultaneous events overlap
# only partially; the labeled beam is then the one framing a complete,
# centered signature.
LEAD_IN_S = 2.2
SLOT_SPAN_S = 4.6
TAIL_S = 0.2
PERSON_STAGGER_S = 1.0
START_JITTER_S = 0.15
EVENT_DURATION_S = {
    "walk_forward": 3.0,
    "walk_back": 3.0,
    "stand_up": 2.8,
    "sit_down": 2.6,
    "bend_down": 2.0,
}
DURATION_JITTER_S = 0.2
AZIMUTH_JITTER_DEG = 0.5
RANGE_BOUNDS_M = (1.0, 3.7)
MATCH_IOU = 0.3

# Trigger settings matched to the scene timing above: the long window must
# recover inside the ~1.3 s inter-event gaps, and the ratio gate must pass
# onsets whose long window still holds the previous event's tail.
DEFAULT_TRIGGER_OVERRIDES = {"n_long": 16, "sigma2": 1.5}


@dataclass(frozen=True)
class SpectrogramConfig:
    window_len: int = DEFAULT_WINDOW_LEN
    hop: int = DEFAULT_HOP
    dynamic_range_db: float = DEFAULT_DYNAMIC_RANGE_DB
    range_min_m: float = RANGE_WINDOW_M[0]
    range_max_m: float = RANGE_WINDOW_M[1]

    def __post_init__(self) -> None:
        if self.window_len < 2 or self.hop < 1:
            raise ConfigError("window_len must be >= 2 and hop >= 1")
        if not 0 <= self.range_min_m < self.range_max_m:
            raise ConfigError("range window must satisfy 0 <= min < max")


@dataclass(frozen=True)
class PipelineConfig:
    radar: RadarParams = field(default_factory=RadarParams)
    counts: dict = field(default_factory=lambda: dict(DEFAULT_CLASS_COUNTS))
    events_per_cube: int = 2
    spectrogram: SpectrogramConfig = field(default_factory=SpectrogramConfig)
    trigger_overrides: dict = field(
        default_factory=lambda: dict(DEFAULT_TRIGGER_OVERRIDES)
    )
    train: TrainConfig = field(default_factory=TrainConfig)
    output_dir: Path = Path("mdradar-run")
    seed: int = 0

    def __post_init__(self) -> None:
        for cls, count in self.counts.items():
            if not isinstance(cls, ActivityClass):
                raise ConfigError(f"counts keyed by unknown class {cls!r}")
            if count < 2:
                raise ConfigError(
                    f"{cls.value}: per-class count must be >= 2, got {count}"
                )
        if self.events_per_cube < 1:
            raise ConfigError("events_per_cube must be >= 1")
        allowed = {f.name for f in dataclasses.fields(TriggerConfig)}
        unknown = set(self.trigger_overrides) - allowed
        if unknown:
            raise ConfigError(f"unknown trigger override(s): {sorted(unknown)}")
        max_event = max(EVENT_DURATION_S.values()) + DURATION_JITTER_S
        need = (
            LEAD_IN_S
            + PERSON_STAGGER_S
            + (self.events_per_cube - 1) * SLOT_SPAN_S
            + max_event
            + START_JITTER_S
            + TAIL_S
        )
        if self.radar.duration < need:
            raise ConfigError(
                f"cube duration {self.radar.duration:.1f}s too short for "
                f"{self.events_per_cube} events (needs >= {need:.1f}s)"
            )

    def to_dict(self) -> dict:
        return {
            "radar": self.radar.to_dict(),
            "scenes": {
                "counts": {
                    c.value: n
                    for c, n in sorted(self.counts.items(), key=lambda kv: kv[0].value)
                },
                "events_per_cube": self.events_per_cube,
            },
            "spectrogram": dataclasses.asdict(self.spectrogram),
            "trigger": dict(sorted(self.trigger_overrides.items())),
            "train": dataclasses.asdict(self.train),
            "output_dir": str(self.output_dir),
            "seed": self.seed,
        }


def resolve_output_dir(path: str | Path) -> Path:
    """Apply the output-root environment override to relative paths."""
    path = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def load_config(source: dict | str | Path) -> PipelineConfig:
    """Build a validated pipeline config from a dict or JSON file."""
    raw = io.read_json(source) if isinstance(source, (str, Path)) else dict(source)
    if not isinstance(raw, dict):
        raise ConfigError("pipeline config must be a JSON object")
    known = {"radar", "scenes", "spectrogram", "trigger", "train", "output_dir", "seed"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    try:
        radar = RadarParams.from_dict(raw.get("radar", {}))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid radar parameters: {exc}") from exc
    scenes = raw.get("scenes", {})
    counts = dict(DEFAULT_CLASS_COUNTS)
    if "counts" in scenes:
        try:
            counts = {
                ActivityClass.from_value(name): int(n)
                for name, n in scenes["counts"].items()
            }
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    seed = int(raw.get("seed", 0))
    try:
        return PipelineConfig(
            radar=radar,
            counts=counts,
            events_per_cube=int(scenes.get("events_per_cube", 3)),
            spectrogram=SpectrogramConfig(**raw.get("spectrogram", {})),
            trigger_overrides={**DEFAULT_TRIGGER_OVERRIDES, **raw.get("trigger", {})},
            train=TrainConfig(**{"seed": seed, **raw.get("train", {})}),
            output_dir=Path(raw.get("output_dir", "mdradar-run")),
            seed=seed,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid pipeline config: {exc}") from exc


# ---------------------------------------------------------------------------
# Scene planning and realization


@dataclass(frozen=True)
class PersonPlan:
    offset_deg: int
    activities: tuple[ActivityClass, ...]


@dataclass(frozen=True)
class CubePlan:
    index: int
    persons: tuple[PersonPlan, ...]


def _rng_for(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *stream]))


def plan_scenes(cfg: PipelineConfig) -> list[CubePlan]:
    """Allocate the per-class event counts into cubes.

    Broadside events become single-person cubes; +30 and -30 events are
    packed into two-person cubes where possible, so off-broadside classes
    are observed against a simultaneous mover at the mirror angle.
    """
    rng = _rng_for(cfg.seed, 1)
    pools: dict[int, list[ActivityClass]] = {0: [], 30: [], -30: []}
    for cls in ActivityClass:
        pools[cls.offset_deg].extend([cls] * cfg.counts.get(cls, 0))
    shuffled = {
        off: [pool[i] for i in rng.permutation(len(pool))] if pool else []
        for off, pool in pools.items()
    }

    def chunks(pool: list[ActivityClass]) -> list[tuple[ActivityClass, ...]]:
        k = cfg.events_per_cube
        return [tuple(pool[i : i + k]) for i in range(0, len(pool), k)]

    plans: list[CubePlan] = []
    for chunk in chunks(shuffled[0]):
        plans.append(CubePlan(len(plans), (PersonPlan(0, chunk),)))
    plus, minus = chunks(shuffled[30]), chunks(shuffled[-30])
    for i in range(max(len(plus), len(minus))):
        persons = []
        if i < len(plus):
            persons.append(PersonPlan(30, plus[i]))
        if i < len(minus):
            persons.append(PersonPlan(-30, minus[i]))
        plans.append(CubePlan(len(plans), tuple(persons)))
    return plans


def _initial_range(activities: tuple[ActivityClass, ...]) -> float:
    """Start range that keeps the whole walk path inside the range window."""
    lo, hi = RANGE_BOUNDS_M
    step = 0.8  # nominal net displacement of one walking event
    pos = [0.0]
    for cls in activities:
        delta = {"walk_forward": -step, "walk_back": step}.get(cls.motion, 0.0)
        pos.append(pos[-1] + delta)
    return (lo + hi) / 2.0 - (min(pos) + max(pos)) / 2.0


def realize_cube(plan: CubePlan, cfg: PipelineConfig) -> RawDataCube:
    """Instantiate one planned cube with seeded jitters and synthesize it."""
    params = cfg.radar
    rng = _rng_for(cfg.seed, 2, plan.index)
    persons: list[PersonMotion] = []
    for person_idx, person in enumerate(plan.persons):
        azimuth = offset_to_azimuth(person.offset_deg) + rng.uniform(
            -AZIMUTH_JITTER_DEG, AZIMUTH_JITTER_DEG
        )
        current_range = _initial_range(person.activities)
        lead = LEAD_IN_S + person_idx * PERSON_STAGGER_S
        for slot, activity in enumerate(person.activities):
            duration_s = EVENT_DURATION_S[activity.motion] + rng.uniform(
                -DURATION_JITTER_S, DURATION_JITTER_S
            )
            start_s = lead + slot * SLOT_SPAN_S + rng.uniform(0, START_JITTER_S)
            start_pulse = int(round(start_s / params.pri))
            n_pulses = int(round(duration_s / params.pri))
            tracks = activity_profile(
                activity,
                n_pulses * params.pri,
                params.pri,
                initial_range=current_range,
                walk_speed=rng.uniform(0.45, 0.55),
                gait_freq=rng.uniform(1.6, 2.0),
                limb_speed=rng.uniform(0.25, 0.35),
                scale=rng.uniform(0.9, 1.1),
            )
            current_range = float(tracks[0].ranges[-1])
            persons.append(
                PersonMotion(
                    azimuth_deg=azimuth,
                    initial_range=float(tracks[0].ranges[0]),
                    activity=activity,
                    scatterers=[
                        replace(
                            tr,
                            ranges=tr.ranges[:n_pulses],
                            velocities=tr.velocities[:n_pulses],
                        )
                        for tr in tracks
                    ],
                    start_pulse=start_pulse,
                    end_pulse=start_pulse + n_pulses,
                )
            )
    seed = int(_rng_for(cfg.seed, 3, plan.index).integers(0, 2**63))
    return synthesize_cube(persons, params, seed)


# ---------------------------------------------------------------------------
# Shared processing helpers


def cube_spectrogram(
    cube: RawDataCube, look_offset: float, spec_cfg: SpectrogramConfig
) -> Spectrogram:
    """Beamform toward the look offset and form the Doppler spectrogram."""
    params = cube.params
    vec = beamform(cube, offset_to_azimuth(look_offset))
    pm = reshape_pulses(vec, params.samples_per_pulse)
    rm = range_map(pm, params)
    lo, hi = range_window_bins(params, spec_cfg.range_min_m, spec_cfg.range_max_m)
    slow = collapse_range(rm, lo, hi)
    return spectrogram(
        slow,
        window=hann_window(spec_cfg.window_len),
        hop=spec_cfg.hop,
        dt=params.pri,
    )


def pulses_to_frames(
    start_pulse: int, end_pulse: int, window_len: int, hop: int, num_frames: int
) -> tuple[int, int]:
    """Frame interval whose window centers fall inside the pulse interval."""
    half = window_len / 2.0
    f0 = int(np.ceil((start_pulse - half) / hop))
    f1 = int(np.ceil((end_pulse - half) / hop))
    f0 = max(0, min(f0, num_frames - 1))
    return f0, min(num_frames, max(f1, f0 + 1))


def interval_iou(a: tuple[int, int], b: tuple[int, int]) -> float:
    inter = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    union = max(a[1], b[1]) - min(a[0], b[0])
    return inter / union if union > 0 else 0.0


def match_events(
    truth_frames: list[tuple[int, int]],
    detected: list[EventInterval],
    min_iou: float = MATCH_IOU,
) -> list[int | None]:
    """Greedy best-IoU assignment of detections to ground-truth intervals."""
    pairs = []
    for ti, tf in enumerate(truth_frames):
        for di, det in enumerate(detected):
            iou = interval_iou(tf, (det.start, det.end))
            if iou >= min_iou:
                pairs.append((iou, ti, di))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    assigned: list[int | None] = [None] * len(truth_frames)
    used: set[int] = set()
    for _, ti, di in pairs:
        if assigned[ti] is None and di not in used:
            assigned[ti] = di
            used.add(di)
    return assigned


def _prepare_output_dir(out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {out_dir}: {exc}") from exc


# ---------------------------------------------------------------------------
# Stages


def stage_synth(cfg: PipelineConfig, out_dir: Path) -> list[Path]:
    """Write the calibration cube and all scene cubes under ``cubes/``."""
    cube_dir = out_dir / "cubes"
    cube_dir.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    noise_seed = int(_rng_for(cfg.seed, 0).integers(0, 2**63))
    noise = synthesize_cube([], cfg.radar, noise_seed)
    files += io.save_cube(noise, cube_dir / "noise.mdc", noise_seed)
    for plan in plan_scenes(cfg):
        cube = realize_cube(plan, cfg)
        files += io.save_cube(cube, cube_dir / f"cube{plan.index:04d}.mdc", None)
    return files


def stage_spectrograms(
    cube_path: Path,
    out_dir: Path,
    spec_cfg: SpectrogramConfig,
    looks: tuple[int, ...] = LOOK_OFFSETS,
    cube_ref: str | None = None,
) -> list[Path]:
    """Beamform one cube at each look offset; write power, PNG, and sidecar."""
    cube_path = Path(cube_path)
    cube = io.load_cube(cube_path)
    spec_dir = out_dir / "spectrograms"
    spec_dir.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    lo, hi = range_window_bins(cube.params, spec_cfg.range_min_m, spec_cfg.range_max_m)
    for offset in looks:
        spec = cube_spectrogram(cube, offset, spec_cfg)
        spec_id = f"{cube_path.stem}_{look_tag(offset)}"
        npy_path = spec_dir / f"{spec_id}.npy"
        np.save(npy_path, spec.power.astype(np.float32))
        files.append(npy_path)
        img = to_image(spec, spec_cfg.dynamic_range_db)
        files.append(io.save_gray_png(img, spec_dir / f"{spec_id}.png"))
        files.append(
            io.write_json(
                {
                    "spectrogram_id": spec_id,
                    "cube": cube_ref if cube_ref is not None else str(cube_path),
                    "look_angle": offset,
                    "azimuth_deg": offset_to_azimuth(offset),
                    "window": "hann",
                    "window_len": spec_cfg.window_len,
                    "hop": spec_cfg.hop,
                    "dt": cube.params.pri,
                    "num_frames": spec.num_frames,
                    "dynamic_range_db": spec_cfg.dynamic_range_db,
                    "range_bins": [lo, hi],
                    "power_npy": f"spectrograms/{spec_id}.npy",
                    "png": f"spectrograms/{spec_id}.png",
                },
                spec_dir / f"{spec_id}.json",
            )
        )
    return files


def power_trigger_signal(power: np.ndarray, window: np.ndarray, hop: int) -> np.ndarray:
    """Trigger signal of a power image: smooth, dual central envelope, offset."""
    smoothed = Spectrogram(
        power=smooth_power(power),
        window=window,
        hop=hop,
        frame_times=np.zeros(power.shape[1]),
        freq_axis=np.zeros(power.shape[0]),
    )
    return trigger_signal(central_envelope_avg(smoothed), smoothed.center_row)


def calibrated_trigger(
    calib_cube: RawDataCube,
    spec_cfg: SpectrogramConfig,
    overrides: dict | None = None,
) -> TriggerConfig:
    """Thresholds from a noise-only cube, with explicit overrides on top."""
    spec = cube_spectrogram(calib_cube, 0, spec_cfg)
    sig = power_trigger_signal(spec.power, spec.window, spec.hop)
    base = calibrate_trigger(sig)
    if overrides:
        base = replace(base, **overrides)
    return base


def _resolve_ref(ref: str, run_dir: Path, spec_dir: Path) -> Path:
    for base in (run_dir, spec_dir, Path(".")):
        candidate = base / ref
        if candidate.exists():
            return candidate
    raise DataError(f"referenced artifact not found: {ref}")


def stage_segment(
    run_dir: Path,
    calib_path: Path,
    out_dir: Path,
    spec_cfg: SpectrogramConfig,
    trigger_overrides: dict | None = None,
) -> tuple[list[Path], list[dict], list[dict]]:
    """Detect events on every stored spectrogram and emit labeled crops.

    Detection runs on each beam independently; detections on a person's own
    beam are matched to that person's ground-truth intervals by IoU and the
    matched crops (all three looks, same interval) become labeled training
    images. Returns (written files, event CSV rows, labeled event metas).
    """
    run_dir = Path(run_dir)
    spec_dir = run_dir / "spectrograms"
    if not spec_dir.is_dir():
        raise DataError(f"no spectrograms directory under {run_dir}")
    sidecars = sorted(spec_dir.glob("*.json"))
    if not sidecars:
        raise DataError(f"no spectrogram sidecars under {spec_dir}")

    calib_cube = io.load_cube(calib_path)
    trigger_cfg = calibrated_trigger(calib_cube, spec_cfg, trigger_overrides)

    events_dir = out_dir / "events"
    images_dir = out_dir / "images"
    events_dir.mkdir(parents=True, exist_ok=True)
    images_dir.mkdir(parents=True, exist_ok=True)

    by_cube: dict[str, list[dict]] = {}
    for sidecar in sidecars:
        meta = io.read_json(sidecar)
        by_cube.setdefault(meta["cube"], []).append(meta)

    files: list[Path] = []
    rows: list[dict] = []
    labeled: list[dict] = []
    event_counter = 0
    for cube_ref in sorted(by_cube):
        metas = {m["look_angle"]: m for m in by_cube[cube_ref]}
        powers: dict[int, np.ndarray] = {}
        images: dict[int, np.ndarray] = {}
        detections: dict[int, list[EventInterval]] = {}
        for offset, meta in sorted(metas.items()):
            npy = _resolve_ref(meta["power_npy"], run_dir, spec_dir)
            power = np.load(npy).astype(np.float64)
            powers[offset] = power
            images[offset] = to_image(power, meta["dynamic_range_db"])
            sig = power_trigger_signal(
                power, hann_window(meta["window_len"]), meta["hop"]
            )
            detections[offset] = detect_events(sig, trigger_cfg)
            for ev in detections[offset]:
                rows.append(
                    {
                        "spectrogram_id": meta["spectrogram_id"],
                        "look_angle": offset,
                        "raw_start": ev.raw_start,
                        "raw_end": ev.raw_end,
                        "start": ev.start,
                        "end": ev.end,
                    }
                )

        cube_sidecar = io.cube_sidecar_path(_resolve_ref(cube_ref, run_dir, spec_dir))
        if not cube_sidecar.exists():
            continue  # ground truth unavailable: events only, no labels
        truth = [
            GroundTruthEvent.from_dict(d)
            for d in io.read_json(cube_sidecar).get("events", [])
        ]
        by_offset: dict[int, list[GroundTruthEvent]] = {}
        for gt in truth:
            by_offset.setdefault(gt.offset_deg, []).append(gt)
        for offset in sorted(by_offset):
            if offset not in detections:
                continue
            gts = sorted(by_offset[offset], key=lambda g: g.start_pulse)
            meta = metas[offset]
            frames = [
                pulses_to_frames(
                    g.start_pulse,
                    g.end_pulse,
                    meta["window_len"],
                    meta["hop"],
                    meta["num_frames"],
                )
                for g in gts
            ]
            assigned = match_events(frames, detections[offset])
            for gt, det_idx in zip(gts, assigned):
                if det_idx is None:
                    continue
                det = detections[offset][det_idx]
                event_id = f"evt{event_counter:04d}"
                event_counter += 1
                image_paths = {}
                for look in LOOK_OFFSETS:
                    crop = crop_pad_resize(
                        images[look], det, source_id=metas[look]["spectrogram_id"]
                    )
                    png = images_dir / f"{event_id}_{look_tag(look)}.png"
                    files.append(io.save_gray_png(crop.pixels[:, :, 0], png))
                    image_paths[str(look)] = f"images/{png.name}"
                meta_out = {
                    "event_id": event_id,
                    "label": gt.activity.value,
                    "cube": cube_ref,
                    "look_angle": offset,
                    "interval": {
                        "start": det.start,
                        "end": det.end,
                        "raw_start": det.raw_start,
                        "raw_end": det.raw_end,
                    },
                    "truth_pulses": [gt.start_pulse, gt.end_pulse],
                    "images": image_paths,
                }
                files.append(io.write_json(meta_out, images_dir / f"{event_id}.json"))
                labeled.append(meta_out)

    files.append(io.write_events_csv(rows, events_dir / "events.csv"))
    files.append(
        io.write_json(dataclasses.asdict(trigger_cfg), events_dir / "trigger.json")
    )
    return files, rows, labeled


def load_dataset(run_dir: Path) -> list[LabeledExample]:
    """Read labeled event image triples back from a run directory."""
    run_dir = Path(run_dir)
    image_dir = run_dir / "images"
    if not image_dir.is_dir():
        raise DataError(f"no images directory under {run_dir}")
    metas = [io.read_json(p) for p in sorted(image_dir.glob("evt*.json"))]
    dataset = []
    for meta in metas:
        triple = []
        for look in LOOK_OFFSETS:
            gray = io.load_gray_png(run_dir / meta["images"][str(look)])
            triple.append(np.repeat(gray[:, :, None], 3, axis=2))
        activity = ActivityClass.from_value(meta["label"])
        onehot = np.zeros(len(ActivityClass))
        onehot[activity.index] = 1.0
        dataset.append(
            LabeledExample(images=tuple(triple), label=onehot, name=activity.value)
        )
    if not dataset:
        raise DataError(f"no labeled events found under {run_dir}")
    return dataset


def stage_train(
    run_dir: Path, train_cfg: TrainConfig, out_dir: Path
) -> tuple[list[Path], dict]:
    """Train on the stored crops; write checkpoint, report, and confusion."""
    dataset = load_dataset(run_dir)
    model_dir = out_dir / "model"
    model_dir.mkdir(parents=True, exist_ok=True)
    try:
        model, losses = train(dataset, train_cfg)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    files = [io.save_model(model, model_dir / "checkpoint.mdn")]

    labels = np.array([ex.class_index for ex in dataset])
    train_idx, test_idx = split_by_class(
        labels, train_cfg.split_fraction, train_cfg.seed
    )
    train_acc, _ = evaluate(model, [dataset[i] for i in train_idx])
    test_acc, confusion = evaluate(model, [dataset[i] for i in test_idx])
    class_names = [c.value for c in ActivityClass]
    files.append(
        io.write_confusion_csv(confusion, class_names, model_dir / "confusion.csv")
    )
    report = {
        "epoch_loss": losses,
        "train_accuracy": train_acc,
        "holdout_accuracy": test_acc,
        "num_events": len(dataset),
        "class_counts": {
            c.value: int((labels == c.index).sum()) for c in ActivityClass
        },
    }
    files.append(io.write_json(report, model_dir / "report.json"))
    return files, report


def stage_eval(model_path: Path, run_dir: Path, out_dir: Path) -> tuple[list[Path], dict]:
    """Evaluate a stored checkpoint over every labeled crop in a run."""
    model = io.load_model(model_path)
    dataset = load_dataset(run_dir)
    accuracy, confusion = evaluate(model, dataset)
    out_dir.mkdir(parents=True, exist_ok=True)
    class_names = [c.value for c in ActivityClass]
    files = [
        io.write_confusion_csv(confusion, class_names, out_dir / "eval_confusion.csv"),
        io.write_json(
            {"accuracy": accuracy, "num_events": len(dataset)},
            out_dir / "eval_report.json",
        ),
    ]
    return files, {"accuracy": accuracy}


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Execute every stage in order and return the hashed artifact manifest."""
    out_dir = resolve_output_dir(cfg.output_dir)
    _prepare_output_dir(out_dir)

    files = stage_synth(cfg, out_dir)
    cube_paths = sorted((out_dir / "cubes").glob("cube*.mdc"))
    for cube_path in cube_paths:
        files += stage_spectrograms(
            cube_path, out_dir, cfg.spectrogram, cube_ref=f"cubes/{cube_path.name}"
        )
    seg_files, _, _ = stage_segment(
        out_dir,
        out_dir / "cubes" / "noise.mdc",
        out_dir,
        cfg.spectrogram,
        cfg.trigger_overrides,
    )
    files += seg_files
    train_files, _ = stage_train(out_dir, cfg.train, out_dir)
    files += train_files

    manifest = {
        "config": cfg.to_dict(),
        "files": {
            str(p.relative_to(out_dir)): io.sha256_file(p) for p in sorted(set(files))
        },
    }
    io.write_json(manifest, out_dir / "manifest.json")
    return manifest


def emit_plots(run_dir: Path, plot_dir: Path | None = None) -> dict:
    """Render envelope/event overlays per spectrogram and a confusion heatmap.

    Missing artifacts are collected and reported, not fatal. Returns the
    written paths, the intervals drawn per spectrogram, and the misses.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    run_dir = Path(run_dir)
    plot_dir = Path(plot_dir) if plot_dir is not None else run_dir / "plots"
    plot_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    drawn: dict[str, list[tuple[int, int]]] = {}
    missing: list[str] = []

    events_by_spec: dict[str, list[dict]] = {}
    events_path = run_dir / "events" / "events.csv"
    if events_path.exists():
        for row in io.read_events_csv(events_path):
            events_by_spec.setdefault(row["spectrogram_id"], []).append(row)
    else:
        missing.append(str(events_path))

    for sidecar in sorted((run_dir / "spectrograms").glob("*.json")):
        meta = io.read_json(sidecar)
        spec_id = meta["spectrogram_id"]
        npy = run_dir / meta["power_npy"]
        if not npy.exists():
            missing.append(str(npy))
            continue
        power = np.load(npy).astype(np.float64)
        spec = Spectrogram(
            power=power,
            window=hann_window(meta["window_len"]),
            hop=meta["hop"],
            frame_times=np.zeros(power.shape[1]),
            freq_axis=np.zeros(power.shape[0]),
        )
        env = envelopes(spec)
        fig, ax = plt.subplots(figsize=(8, 5))
        floor = power.max(initial=0.0) * 1e-10 + np.finfo(float).tiny
        ax.imshow(
            10 * np.log10(np.maximum(power, floor)),
            aspect="auto",
            origin="lower",
            cmap="viridis",
        )
        frames = np.arange(power.shape[1])
        ax.plot(frames, env.upper, color="w", lw=1.0, label="upper")
        ax.plot(frames, env.central, color="c", lw=1.0, label="central")
        ax.plot(frames, env.lower, color="m", lw=1.0, label="lower")
        drawn[spec_id] = []
        for row in events_by_spec.get(spec_id, []):
            ax.axvspan(row["start"], row["end"], color="r", alpha=0.2)
            drawn[spec_id].append((row["start"], row["end"]))
        ax.set_xlabel("frame")
        ax.set_ylabel("Doppler bin")
        ax.set_title(spec_id)
        ax.legend(loc="upper right", fontsize=8)
        out = plot_dir / f"{spec_id}_overlay.png"
        fig.savefig(out, dpi=100)
        plt.close(fig)
        written.append(out)

    confusion_path = run_dir / "model" / "confusion.csv"
    if confusion_path.exists():
        names, matrix = io.read_confusion_csv(confusion_path)
        fig, ax = plt.subplots(figsize=(7, 6))
        im = ax.imshow(matrix, cmap="Blues", vmin=0, vmax=100)
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=90, fontsize=7)
        ax.set_yticks(range(len(names)))
        ax.set_yticklabels(names, fontsize=7)
        ax.set_xlabel("predicted")
        ax.set_ylabel("actual")
        fig.colorbar(im, ax=ax, label="%")
        fig.tight_layout()
        out = plot_dir / "confusion.png"
        fig.savefig(out, dpi=100)
        plt.close(fig)
        written.append(out)
    else:
        missing.append(str(confusion_path))

    return {
        "plots": [str(p) for p in written],
        "intervals": drawn,
        "missing": missing,
    }
