"""Command-line front end.

Subcommands:
  mask         generate (or apply) a mask and write the distorted image
  reconstruct  fill the masked pixels of one channel from the others
  evaluate     PSNR/SSIM of a reconstruction against the clean image
  batch        mask + reconstruct + evaluate over a directory, CSV output

Exit codes: 0 success, 2 input error (unreadable/missing files), 3
validation error (inconsistent dimensions, bad parameters).
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .block_matching import NocsParams
from .errors import InputError, NocsError, ValidationError
from .image_model import Channel, Mask, new_problem
from .io import list_images, load_planes, quantize, save_planes
from .masks import PATTERNS, MaskSpec, generate_mask, load_mask, save_mask
from .metrics import psnr as psnr_metric
from .metrics import ssim as ssim_metric
from .reconstructor import reconstruct

_EXIT_OK = 0
_EXIT_INPUT = 2
_EXIT_VALIDATION = 3

_BATCH_CSV_HEADER = "image,psnr_db,ssim,seconds"
_EVAL_CSV_HEADER = "path,psnr_db,ssim"
_ERROR_MARKER = "error"


@dataclass
class RunConfig:
    """Resolved options shared by the masking/reconstruction commands."""

    channel: int
    params: NocsParams
    seed: int
    workers: int | None
    progress: bool
    mask_file: Path | None
    mask_pattern: str
    density: float
    element_size: int | None


def _config_from_args(args) -> RunConfig:
    params = NocsParams(
        block_size=getattr(args, "block_size", 9),
        stack_size=getattr(args, "stack_size", 44),
        search_radius=getattr(args, "search_radius", 16),
        batch_fraction=getattr(args, "batch_fraction", 0.10),
    )
    mask_file = getattr(args, "mask", None)
    pattern = getattr(args, "mask_pattern", None)
    density = getattr(args, "density", None)
    element_size = getattr(args, "element_size", None)
    if mask_file is not None and any(v is not None for v in (pattern, density, element_size)):
        raise ValidationError(
            "bad_config", "give either a mask file or mask spec options, not both"
        )
    return RunConfig(
        channel=args.channel,
        params=params,
        seed=getattr(args, "seed", 0),
        workers=getattr(args, "workers", None),
        progress=getattr(args, "progress", False),
        mask_file=Path(mask_file) if mask_file else None,
        mask_pattern=pattern if pattern is not None else "four_quadrant",
        density=density if density is not None else 0.15,
        element_size=element_size,
    )


def _check_channel(planes: np.ndarray, channel: int) -> None:
    if not (0 <= channel < planes.shape[0]):
        raise ValidationError(
            "bad_channel",
            f"channel {channel} out of range for a {planes.shape[0]}-plane image",
        )


def _obtain_mask(config: RunConfig, shape: tuple[int, int], seed: int) -> tuple[Mask, MaskSpec | None]:
    if config.mask_file is not None:
        mask = load_mask(config.mask_file)
        if mask.shape != shape:
            raise ValidationError(
                "dimension_mismatch",
                f"mask shape {mask.shape} does not match image shape {shape}",
            )
        return mask, None
    spec = MaskSpec(
        width=shape[1],
        height=shape[0],
        pattern=config.mask_pattern,
        density=config.density,
        element_size=config.element_size,
        seed=seed,
    )
    return generate_mask(spec), spec


def _progress_printer(enabled: bool):
    if not enabled:
        return None

    def emit(iteration: int, remaining: int) -> None:
        print(f"iteration {iteration}: {remaining} pixels remaining", file=sys.stderr)

    return emit


def _reconstruct_planes(
    planes: np.ndarray, mask: Mask, config: RunConfig
) -> np.ndarray:
    """Run reconstruction on the configured channel; other planes pass through."""
    if planes.shape[0] < 2:
        raise ValidationError(
            "empty_references", "need at least two planes to form reference channels"
        )
    _check_channel(planes, config.channel)
    distorted = Channel(planes[config.channel])
    references = [
        Channel(planes[i]) for i in range(planes.shape[0]) if i != config.channel
    ]
    problem = new_problem(distorted, mask, references)
    result = reconstruct(
        problem,
        config.params,
        workers=config.workers,
        progress=_progress_printer(config.progress),
    )
    out = planes.copy()
    out[config.channel] = quantize(result.values)
    return out


def _format_psnr(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.2f}"


def _cmd_mask(args) -> int:
    config = _config_from_args(args)
    planes, kind = load_planes(args.input)
    _check_channel(planes, config.channel)
    mask, spec = _obtain_mask(config, planes.shape[1:], config.seed)
    distorted = planes.copy()
    distorted[config.channel] = planes[config.channel] * mask.flags
    save_mask(mask, args.mask_out, spec)
    save_planes(args.output, distorted, kind)
    return _EXIT_OK


def _cmd_reconstruct(args) -> int:
    config = _config_from_args(args)
    planes, kind = load_planes(args.input)
    mask = load_mask(args.mask)
    if mask.shape != planes.shape[1:]:
        raise ValidationError(
            "dimension_mismatch",
            f"mask shape {mask.shape} does not match image shape {planes.shape[1:]}",
        )
    out = _reconstruct_planes(planes, mask, config)
    save_planes(args.output, out, kind)
    return _EXIT_OK


def _append_csv_row(path: Path, header: str, row: str) -> None:
    new_file = not path.exists()
    with open(path, "a", encoding="utf-8", newline="\n") as handle:
        if new_file:
            handle.write(header + "\n")
        handle.write(row + "\n")


def _cmd_evaluate(args) -> int:
    clean_planes, _ = load_planes(args.clean)
    test_planes, _ = load_planes(args.reconstructed)
    if clean_planes.shape != test_planes.shape:
        raise ValidationError(
            "dimension_mismatch",
            f"image shapes differ: {clean_planes.shape[1:]} vs {test_planes.shape[1:]}",
        )
    _check_channel(clean_planes, args.channel)
    clean = Channel(clean_planes[args.channel])
    test = Channel(test_planes[args.channel])
    psnr_db = psnr_metric(clean, test)
    ssim_value = ssim_metric(clean, test)
    print(f"PSNR: {_format_psnr(psnr_db)} dB, SSIM: {ssim_value:.3f}")
    if args.csv:
        _append_csv_row(
            Path(args.csv),
            _EVAL_CSV_HEADER,
            f"{args.reconstructed},{_format_psnr(psnr_db)},{ssim_value:.3f}",
        )
    return _EXIT_OK


def _cmd_batch(args) -> int:
    config = _config_from_args(args)
    images = list_images(args.image_dir)
    out_dir = Path(args.output_dir) if args.output_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    scores = []
    for index, image_path in enumerate(images):
        try:
            planes, kind = load_planes(image_path)
            _check_channel(planes, config.channel)
            mask, spec = _obtain_mask(config, planes.shape[1:], config.seed + index)
            started = time.perf_counter()
            distorted = planes.copy()
            distorted[config.channel] = planes[config.channel] * mask.flags
            out = _reconstruct_planes(distorted, mask, config)
            seconds = time.perf_counter() - started
            clean = Channel(planes[config.channel])
            recon = Channel(out[config.channel])
            psnr_db = psnr_metric(clean, recon)
            ssim_value = ssim_metric(clean, recon)
            if out_dir is not None:
                save_mask(mask, out_dir / f"{image_path.stem}_mask.png", spec)
                save_planes(out_dir / f"{image_path.stem}_recon{image_path.suffix}", out, kind)
            rows.append(
                f"{image_path.name},{_format_psnr(psnr_db)},{ssim_value:.3f},{seconds:.2f}"
            )
            scores.append((psnr_db, ssim_value, seconds))
        except (NocsError, OSError) as exc:
            print(f"{image_path.name}: {exc}", file=sys.stderr)
            rows.append(
                f"{image_path.name},{_ERROR_MARKER},{_ERROR_MARKER},{_ERROR_MARKER}"
            )
    if scores:
        mean_psnr = float(np.mean([s[0] for s in scores]))
        mean_ssim = float(np.mean([s[1] for s in scores]))
        mean_seconds = float(np.mean([s[2] for s in scores]))
        rows.append(
            f"mean,{_format_psnr(mean_psnr)},{mean_ssim:.3f},{mean_seconds:.2f}"
        )
    else:
        rows.append(f"mean,{_ERROR_MARKER},{_ERROR_MARKER},{_ERROR_MARKER}")
    with open(args.csv, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(_BATCH_CSV_HEADER + "\n")
        for row in rows:
            handle.write(row + "\n")
    return _EXIT_OK


def _add_params_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--block-size", type=int, default=9, help="comparison block side")
    parser.add_argument("--stack-size", type=int, default=44, help="matched locations per pixel")
    parser.add_argument("--search-radius", type=int, default=16, help="window radius in pixels")
    parser.add_argument(
        "--batch-fraction", type=float, default=0.10, help="share of pending pixels per iteration"
    )


def _add_mask_spec_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mask", default=None, help="use an existing mask file instead of a spec")
    parser.add_argument("--mask-pattern", choices=PATTERNS, default=None, help="generated pattern")
    parser.add_argument("--density", type=float, default=None, help="masked-pixel fraction")
    parser.add_argument("--element-size", type=int, default=None, help="rectangle/bar thickness")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nocs",
        description="Reconstruct masked pixels of one spectral channel from the others.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_mask = sub.add_parser("mask", help="generate a mask and the distorted image")
    p_mask.add_argument("input", help="clean input image (PNG/PPM or band manifest)")
    p_mask.add_argument("--mask-out", required=True, help="output mask file")
    p_mask.add_argument("--output", "-o", required=True, help="output distorted image")
    p_mask.add_argument("--channel", type=int, default=1, help="channel to distort (default 1)")
    p_mask.add_argument("--seed", type=int, default=0, help="mask generation seed")
    _add_mask_spec_options(p_mask)
    p_mask.set_defaults(handler=_cmd_mask)

    p_rec = sub.add_parser("reconstruct", help="reconstruct the masked channel")
    p_rec.add_argument("input", help="distorted input image")
    p_rec.add_argument("--mask", required=True, help="mask file (0 masked, 255 valid)")
    p_rec.add_argument("--output", "-o", required=True, help="output reconstructed image")
    p_rec.add_argument("--channel", type=int, default=1, help="distorted channel (default 1)")
    p_rec.add_argument("--workers", type=int, default=None, help="matching threads cap")
    p_rec.add_argument("--progress", action="store_true", help="print progress to stderr")
    _add_params_options(p_rec)
    p_rec.set_defaults(handler=_cmd_reconstruct)

    p_eval = sub.add_parser("evaluate", help="PSNR/SSIM of a reconstruction")
    p_eval.add_argument("clean", help="clean reference image")
    p_eval.add_argument("reconstructed", help="reconstructed image")
    p_eval.add_argument("--channel", type=int, default=1, help="channel to score (default 1)")
    p_eval.add_argument("--csv", default=None, help="append a CSV row to this file")
    p_eval.set_defaults(handler=_cmd_evaluate)

    p_batch = sub.add_parser("batch", help="mask, reconstruct, and score a directory")
    p_batch.add_argument("image_dir", help="directory of clean images")
    p_batch.add_argument("--csv", required=True, help="output CSV path")
    p_batch.add_argument("--output-dir", default=None, help="optionally save masks/reconstructions")
    p_batch.add_argument("--channel", type=int, default=1, help="channel to distort (default 1)")
    p_batch.add_argument("--seed", type=int, default=0, help="base seed; image i uses seed+i")
    p_batch.add_argument("--workers", type=int, default=None, help="matching threads cap")
    p_batch.add_argument("--progress", action="store_true", help="print progress to stderr")
    _add_mask_spec_options(p_batch)
    _add_params_options(p_batch)
    p_batch.set_defaults(handler=_cmd_batch)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
