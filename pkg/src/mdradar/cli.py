"""Command-line front end: stage commands plus the full pipeline.

Exit codes: 0 success, 2 configuration error, 3 data error. Relative output
paths honor the MDRADAR_OUTPUT_ROOT environment variable.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click
import numpy as np

from . import io
from .beamform import beamform
from .nnet import TrainConfig
from .params import ConfigError, DataError, offset_to_azimuth
from .pipeline import (
    PipelineConfig,
    SpectrogramConfig,
    emit_plots,
    load_config,
    resolve_output_dir,
    run_pipeline,
    stage_eval,
    stage_segment,
    stage_spectrograms,
    stage_synth,
    stage_train,
)

EXIT_CONFIG = 2
EXIT_DATA = 3

_LOOK_CHOICES = ("0", "+30", "-30")


def _parse_look(value: str) -> int:
    try:
        look = int(value)
    except ValueError:
        raise ConfigError(f"look angle must be one of {_LOOK_CHOICES}, got {value!r}")
    if look not in (0, 30, -30):
        raise ConfigError(f"look angle must be one of {_LOOK_CHOICES}, got {value!r}")
    return look


def _stage(fn):
    """Map domain errors onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except (DataError, FileNotFoundError) as exc:
            click.echo(f"data error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except ValueError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)

    return wrapper


def _load_cfg(config: str | None, out: str | None, seed: int | None) -> PipelineConfig:
    cfg = load_config(config) if config else load_config({})
    updates = {}
    if out is not None:
        updates["output_dir"] = Path(out)
    if seed is not None:
        updates["seed"] = seed
        updates["train"] = TrainConfig(
            **{
                **{
                    f: getattr(cfg.train, f)
                    for f in cfg.train.__dataclass_fields__
                },
                "seed": seed,
            }
        )
    if updates:
        import dataclasses

        cfg = dataclasses.replace(cfg, **updates)
    return cfg


@click.group()
def main() -> None:
    """Micro-Doppler radar activity pipeline."""


@main.command()
@click.option("--config", "-c", type=click.Path(), default=None, help="Pipeline JSON config.")
@click.option("--out", type=click.Path(), default=None, help="Output directory override.")
@click.option("--seed", type=int, default=None, help="Run seed override.")
@_stage
def synth(config: str | None, out: str | None, seed: int | None) -> None:
    """Generate the calibration cube and all scene cubes."""
    cfg = _load_cfg(config, out, seed)
    out_dir = resolve_output_dir(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = stage_synth(cfg, out_dir)
    click.echo(f"wrote {len(files)} files under {out_dir / 'cubes'}")


@main.command(name="beamform")
@click.option("--in", "cube_path", type=click.Path(), required=True, help="Input cube (.mdc).")
@click.option("--look-angle", type=click.Choice(_LOOK_CHOICES), required=True)
@click.option("--out", type=click.Path(), required=True, help="Output .npy vector.")
@_stage
def beamform_cmd(cube_path: str, look_angle: str, out: str) -> None:
    """Spatially filter a cube toward one look direction."""
    look = _parse_look(look_angle)
    cube = io.load_cube(cube_path)
    vec = beamform(cube, offset_to_azimuth(look))
    out_path = resolve_output_dir(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    np.save(out_path, vec.astype(np.complex64))
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--in", "cube_path", type=click.Path(), required=True, help="Input cube (.mdc).")
@click.option(
    "--look-angle",
    type=click.Choice(_LOOK_CHOICES),
    multiple=True,
    default=_LOOK_CHOICES,
    help="Look offsets to process (repeatable; default all three).",
)
@click.option("--out", type=click.Path(), required=True, help="Run directory.")
@click.option("--window-len", type=int, default=128, show_default=True)
@click.option("--hop", type=int, default=93, show_default=True)
@click.option("--dynamic-range-db", type=float, default=60.0, show_default=True)
@click.option("--range-min", type=float, default=0.5, show_default=True)
@click.option("--range-max", type=float, default=4.0, show_default=True)
@_stage
def spectrogram(
    cube_path: str,
    look_angle: tuple[str, ...],
    out: str,
    window_len: int,
    hop: int,
    dynamic_range_db: float,
    range_min: float,
    range_max: float,
) -> None:
    """Beamform a cube and write micro-Doppler spectrograms."""
    spec_cfg = SpectrogramConfig(
        window_len=window_len,
        hop=hop,
        dynamic_range_db=dynamic_range_db,
        range_min_m=range_min,
        range_max_m=range_max,
    )
    looks = tuple(_parse_look(v) for v in look_angle)
    out_dir = resolve_output_dir(out)
    files = stage_spectrograms(Path(cube_path), out_dir, spec_cfg, looks=looks)
    click.echo(f"wrote {len(files)} files under {out_dir / 'spectrograms'}")


@main.command()
@click.option("--in", "run_dir", type=click.Path(), required=True, help="Directory holding spectrograms/.")
@click.option("--calib", type=click.Path(), required=True, help="Noise-only cube for threshold calibration.")
@click.option("--out", type=click.Path(), default=None, help="Output directory (defaults to --in).")
@click.option("--sigma1", type=float, default=None, help="Override the on threshold.")
@click.option("--sigma2", type=float, default=None, help="Override the ratio threshold.")
@click.option("--sigma3", type=float, default=None, help="Override the off threshold.")
@_stage
def segment(
    run_dir: str,
    calib: str,
    out: str | None,
    sigma1: float | None,
    sigma2: float | None,
    sigma3: float | None,
) -> None:
    """Detect events on stored spectrograms and export labeled crops."""
    overrides = {
        k: v
        for k, v in {"sigma1": sigma1, "sigma2": sigma2, "sigma3": sigma3}.items()
        if v is not None
    }
    base = Path(run_dir)
    out_dir = resolve_output_dir(out) if out else base
    sidecars = sorted((base / "spectrograms").glob("*.json"))
    if not sidecars:
        raise DataError(f"no spectrogram sidecars under {base / 'spectrograms'}")
    meta = io.read_json(sidecars[0])
    spec_cfg = SpectrogramConfig(
        window_len=meta["window_len"],
        hop=meta["hop"],
        dynamic_range_db=meta["dynamic_range_db"],
    )
    files, rows, labeled = stage_segment(base, Path(calib), out_dir, spec_cfg, overrides)
    click.echo(
        f"detected {len(rows)} events, labeled {len(labeled)}; "
        f"wrote {len(files)} files under {out_dir}"
    )


@main.command()
@click.option("--in", "run_dir", type=click.Path(), required=True, help="Directory holding images/.")
@click.option("--out", type=click.Path(), default=None, help="Output directory (defaults to --in).")
@click.option("--config", "-c", type=click.Path(), default=None, help="Pipeline JSON config (train section).")
@click.option("--seed", type=int, default=None)
@_stage
def train(run_dir: str, out: str | None, config: str | None, seed: int | None) -> None:
    """Train the classifier on labeled crops."""
    cfg = _load_cfg(config, None, seed)
    out_dir = resolve_output_dir(out) if out else Path(run_dir)
    files, report = stage_train(Path(run_dir), cfg.train, out_dir)
    click.echo(
        f"train accuracy {report['train_accuracy']:.3f}, "
        f"holdout accuracy {report['holdout_accuracy']:.3f}; "
        f"wrote {len(files)} files under {out_dir / 'model'}"
    )


@main.command(name="eval")
@click.option("--model", type=click.Path(), required=True, help="Checkpoint (.mdn).")
@click.option("--in", "run_dir", type=click.Path(), required=True, help="Directory holding images/.")
@click.option("--out", type=click.Path(), default=None, help="Output directory (defaults to --in/model).")
@_stage
def eval_cmd(model: str, run_dir: str, out: str | None) -> None:
    """Evaluate a checkpoint over every labeled crop in a run."""
    out_dir = resolve_output_dir(out) if out else Path(run_dir) / "model"
    files, report = stage_eval(Path(model), Path(run_dir), out_dir)
    click.echo(f"accuracy {report['accuracy']:.3f}; wrote {len(files)} files")


@main.command()
@click.option("--config", "-c", type=click.Path(), default=None, help="Pipeline JSON config.")
@click.option("--out", type=click.Path(), default=None, help="Output directory override.")
@click.option("--seed", type=int, default=None, help="Run seed override.")
@_stage
def pipeline(config: str | None, out: str | None, seed: int | None) -> None:
    """Run synth, spectrograms, segmentation, training, and reporting."""
    cfg = _load_cfg(config, out, seed)
    manifest = run_pipeline(cfg)
    out_dir = resolve_output_dir(cfg.output_dir)
    click.echo(f"{len(manifest['files'])} artifacts; manifest at {out_dir / 'manifest.json'}")


@main.command()
@click.option("--run", "run_dir", type=click.Path(), required=True, help="Completed run directory.")
@click.option("--out", type=click.Path(), default=None, help="Plot directory (defaults to run/plots).")
@_stage
def plots(run_dir: str, out: str | None) -> None:
    """Render envelope/event overlays and the confusion heatmap."""
    result = emit_plots(Path(run_dir), Path(out) if out else None)
    click.echo(f"wrote {len(result['plots'])} plots")
    for miss in result["missing"]:
        click.echo(f"missing artifact (skipped): {miss}", err=True)


if __name__ == "__main__":
    main()
