"""File formats: raw cubes, model checkpoints, images, CSV, and manifests.

Cubes are stored little-endian under the magic ``MDC1`` (header sizes +
float64 front-end parameters, interleaved complex64 body) with a JSON
ground-truth sidecar. Checkpoints use the magic ``MDN1`` (named float32
tensors). Both formats reject unknown magics or truncated bodies.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .nnet.model import CnnModel
from .params import DataError, RadarParams
from .scene import GroundTruthEvent, RawDataCube

CUBE_MAGIC = b"MDC1"
MODEL_MAGIC = b"MDN1"
_CUBE_HEADER = struct.Struct("<4sIII6d")


def cube_sidecar_path(path: Path) -> Path:
    return Path(path).with_suffix(".json")


def save_cube(cube: RawDataCube, path: Path, seed: int | None = None) -> list[Path]:
    """Write a cube plus its ground-truth sidecar; returns both paths."""
    path = Path(path)
    p = cube.params
    header = _CUBE_HEADER.pack(
        CUBE_MAGIC,
        p.samples_per_pulse,
        p.num_pulses,
        p.num_elements,
        p.carrier_freq,
        p.bandwidth,
        p.pri,
        p.adc_rate,
        p.element_spacing,
        p.noise_variance,
    )
    body = np.ascontiguousarray(cube.samples.astype(np.complex64)).tobytes()
    path.write_bytes(header + body)
    sidecar = cube_sidecar_path(path)
    write_json(
        {
            "seed": seed,
            "params": p.to_dict(),
            "events": [ev.to_dict() for ev in cube.ground_truth],
        },
        sidecar,
    )
    return [path, sidecar]


def load_cube(path: Path) -> RawDataCube:
    path = Path(path)
    if not path.exists():
        raise DataError(f"cube file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < _CUBE_HEADER.size:
        raise DataError(f"cube file too short: {path}")
    magic, p, q, m, carrier, bandwidth, pri, adc_rate, spacing, noise = (
        _CUBE_HEADER.unpack_from(blob)
    )
    if magic != CUBE_MAGIC:
        raise DataError(f"bad cube magic {magic!r} in {path}")
    params = RadarParams(
        carrier_freq=carrier,
        bandwidth=bandwidth,
        pri=pri,
        adc_rate=adc_rate,
        num_pulses=q,
        num_elements=m,
        element_spacing=spacing,
        noise_variance=noise,
    )
    if params.samples_per_pulse != p:
        raise DataError(f"inconsistent cube header in {path}")
    expected = p * q * m * 8
    body = blob[_CUBE_HEADER.size :]
    if len(body) != expected:
        raise DataError(
            f"cube body has {len(body)} bytes, expected {expected}: {path}"
        )
    samples = np.frombuffer(body, dtype="<c8").reshape(p * q, m)
    truth: list[GroundTruthEvent] = []
    sidecar = cube_sidecar_path(path)
    if sidecar.exists():
        meta = read_json(sidecar)
        truth = [GroundTruthEvent.from_dict(d) for d in meta.get("events", [])]
    return RawDataCube(
        samples=samples.astype(np.complex128), params=params, ground_truth=truth
    )


def save_gray_png(image01: np.ndarray, path: Path) -> Path:
    """Store a [0, 1] float image as 8-bit grayscale PNG."""
    path = Path(path)
    arr = np.clip(np.asarray(image01), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="L").save(path)
    return path


def load_gray_png(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"image not found: {path}")
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.float32) / 255.0


EVENT_CSV_FIELDS = (
    "spectrogram_id",
    "look_angle",
    "raw_start",
    "raw_end",
    "start",
    "end",
)


def write_events_csv(rows: list[dict], path: Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=EVENT_CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in EVENT_CSV_FIELDS})
    return path


def read_events_csv(path: Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"events file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for key in ("raw_start", "raw_end", "start", "end", "look_angle"):
            row[key] = int(row[key])
    return rows


def save_model(model: CnnModel, path: Path) -> Path:
    path = Path(path)
    arch = (
        model.input_hw,
        model.in_channels,
        model.num_filters,
        model.num_conv,
        model.hidden_units,
        model.num_classes,
    )
    chunks = [MODEL_MAGIC, struct.pack("<I", 1), struct.pack("<6I", *arch)]
    names = sorted(model.params)
    chunks.append(struct.pack("<I", len(names)))
    for name in names:
        tensor = np.ascontiguousarray(model.params[name], dtype="<f4")
        encoded = name.encode()
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", tensor.ndim))
        chunks.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        chunks.append(tensor.tobytes())
    path.write_bytes(b"".join(chunks))
    return path


def load_model(path: Path) -> CnnModel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    blob = path.read_bytes()
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(blob):
            raise DataError(f"truncated checkpoint: {path}")
        out = blob[off : off + n]
        off += n
        return out

    if take(4) != MODEL_MAGIC:
        raise DataError(f"bad checkpoint magic in {path}")
    (version,) = struct.unpack("<I", take(4))
    if version != 1:
        raise DataError(f"unsupported checkpoint version {version}")
    hw, c_in, filt, n_conv, hidden, classes = struct.unpack("<6I", take(24))
    (count,) = struct.unpack("<I", take(4))
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode()
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        size = int(np.prod(shape)) if ndim else 1
        params[name] = np.frombuffer(take(4 * size), dtype="<f4").reshape(shape).copy()
    return CnnModel(
        input_hw=hw,
        in_channels=c_in,
        num_filters=filt,
        num_conv=n_conv,
        hidden_units=hidden,
        num_classes=classes,
        dtype=np.float32,
        params=params,
    )


def write_json(obj, path: Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path: Path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON in {path}: {exc}") from exc


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_confusion_csv(
    confusion: np.ndarray, class_names: list[str], path: Path
) -> Path:
    """Row-normalized percentage confusion matrix, actual x predicted."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["actual\\predicted", *class_names])
        for name, row in zip(class_names, confusion):
            writer.writerow([name, *(f"{v:.1f}" for v in row)])
    return path


def read_confusion_csv(path: Path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"confusion matrix not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    names = rows[0][1:]
    values = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    return names, values
