"""Command-line front end.

    partlift gen-synthetic --seed 7 --out s7/
    partlift render --parts s7/ --yaw 1.5708 --pitch 1.5708 --out frame/
    partlift sweep --parts s7/ --yaw-range 0.3 --steps 10 --out sweep/
    partlift metrics --a a.ppm --b b.ppm [--mask edited.pgm]
    partlift check-grad --count 100 --size 8
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .errors import (
    ConfigError,
    DomainError,
    NumericError,
    PartliftError,
    PartSetFormatError,
    PoseError,
    UsageError,
)
from .imageio import ImageFormatError, feature_rgb, load_mask, load_unit_image, to_uint8, write_pgm, write_ppm
from .lifting import MappingFn
from .maskrender import MaskWeightMode
from .part_model import SynthConfig, load_part_set, occlusion_scene, save_part_set, synth_part_set
from .raycam import N_SAMPLES_TEST, N_SAMPLES_TRAIN, POSE_MEAN, CameraConfig, CameraPose
from .renderer import RenderOptions, render_frame

EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_MEMORY = 4
EXIT_NUMERIC = 5


def _add_render_args(p):
    p.add_argument("--parts", required=True, help="part-set directory")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--pitch", type=float, default=POSE_MEAN)
    p.add_argument("--n-samples", type=int, default=None, help=f"samples per ray (default {N_SAMPLES_TEST})")
    p.add_argument("--train-profile", action="store_true", help=f"use {N_SAMPLES_TRAIN} samples per ray")
    p.add_argument("--mapping", default="gaussian:1", help="gaussian:ALPHA or invprop:BETA")
    p.add_argument("--mask-mode", choices=[m.value for m in MaskWeightMode], default="nerf")
    p.add_argument("--active", default="all", help="'all' or comma-separated part names/indices")
    p.add_argument("--feature-vis", choices=["first3", "norm"], default="first3")
    p.add_argument("--size", type=int, default=None, help="frame width/height (default: part map size)")
    p.add_argument("--depth-levels", type=int, default=32)
    p.add_argument("--fov", type=float, default=None, help="vertical field of view, radians")
    p.add_argument("--jitter-seed", type=int, default=None, help="stratified sample jitter")
    p.add_argument("--threads", type=int, default=None, help="worker threads (env PARTLIFT_THREADS)")
    p.add_argument("--plot", action="store_true", help="also write a matplotlib PNG panel")


def build_parser():
    parser = argparse.ArgumentParser(prog="partlift", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-synthetic", help="write a procedural part set")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--scene", choices=["portrait", "occlusion"], default="portrait")
    g.add_argument("--parts-count", "-K", dest="K", type=int, default=13)
    g.add_argument("--size", type=int, default=64)
    g.add_argument("--channels", type=int, default=16)
    g.add_argument("--depth-levels", type=int, default=32)
    g.add_argument("--face-base-depth", type=float, default=None)
    g.add_argument("--absolute-depth", action="store_true", help="facial parts store absolute depth")

    r = sub.add_parser("render", help="render one frame")
    _add_render_args(r)
    r.add_argument("--yaw", type=float, default=POSE_MEAN)

    s = sub.add_parser("sweep", help="render a yaw sweep around the frontal pose")
    _add_render_args(s)
    s.add_argument("--yaw-range", type=float, default=0.3)
    s.add_argument("--steps", type=int, default=10)

    m = sub.add_parser("metrics", help="difference-map metrics of two images")
    m.add_argument("--a", required=True, help="original image (PPM/PGM)")
    m.add_argument("--b", required=True, help="edited image (PPM/PGM)")
    m.add_argument("--mask", default=None, help="edited-region mask (PGM, nonzero = edited)")

    c = sub.add_parser("check-grad", help="finite-difference check of the depth-smoothness gradient")
    c.add_argument("--parts", default=None, help="check this part set instead of random depths")
    c.add_argument("--count", type=int, default=100)
    c.add_argument("--size", type=int, default=8)
    c.add_argument("--parts-count", "-K", dest="K", type=int, default=13)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--h", type=float, default=1e-4)
    c.add_argument("--tol", type=float, default=1e-4)
    c.add_argument(
        "--floor", type=float, default=1e-8, help="gradients smaller than this are compared in absolute terms"
    )
    c.add_argument("--corrupt", type=float, default=1.0, help="scale the analytic gradient (negative control)")
    return parser


def _parse_active(text, parts):
    if text == "all":
        return None
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok.isdigit():
            k = int(tok)
            if not 0 <= k < parts.K:
                raise UsageError(f"--active: part index {k} out of range 0..{parts.K - 1}")
            out.append(k)
        else:
            try:
                out.append(parts.index_of(tok))
            except KeyError:
                raise UsageError(f"--active: unknown part {tok!r}") from None
    if not out:
        raise UsageError("--active selects no parts")
    return tuple(sorted(set(out)))


def _render_setup(args):
    parts = load_part_set(args.parts)
    if args.train_profile and args.n_samples is not None:
        raise UsageError("--train-profile and --n-samples are mutually exclusive")
    n = N_SAMPLES_TRAIN if args.train_profile else (args.n_samples or N_SAMPLES_TEST)
    size = args.size or parts.W
    cam_kw = {"image_w": size, "image_h": size, "n_samples": n}
    if args.fov is not None:
        cam_kw["fov_y"] = args.fov
    cfg = CameraConfig(**cam_kw)
    opts = RenderOptions(
        mapping=MappingFn.parse(args.mapping),
        active=_parse_active(args.active, parts),
        mask_mode=MaskWeightMode(args.mask_mode),
        depth_levels=args.depth_levels,
        threads=args.threads,
        jitter_seed=args.jitter_seed,
    )
    return parts, cfg, opts


def _frame_record(frame, parts, cfg, opts, args):
    labels = frame.labels
    return {
        "pose": {"yaw": frame.pose.yaw, "pitch": frame.pose.pitch},
        "config": {
            "image_w": cfg.image_w,
            "image_h": cfg.image_h,
            "n_samples": cfg.n_samples,
            "fov_y": cfg.fov_y,
            "orbit_radius": cfg.orbit_radius,
            "depth_levels": opts.depth_levels,
            "mapping": str(opts.mapping),
            "mask_mode": opts.mask_mode.value,
            "active": list(frame.active),
            "feature_vis": args.feature_vis,
            "jitter_seed": opts.jitter_seed,
        },
        "coverage": float(frame.coverage.mean()),
        "parts": [
            {
                "index": p.id.index,
                "name": p.id.name,
                "active": p.id.index in frame.active,
                "label_pixels": int(np.count_nonzero(labels == p.id.index)),
                "mask_area": float(frame.mask[..., p.id.index].sum()),
            }
            for p in sorted(parts.parts, key=lambda p: p.id.index)
        ],
    }


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_gen_synthetic(args):
    if args.scene == "occlusion":
        parts = occlusion_scene(size=args.size, channels=args.channels, depth_levels=args.depth_levels)
    else:
        cfg = SynthConfig(
            seed=args.seed,
            K=args.K,
            H=args.size,
            W=args.size,
            C=args.channels,
            Z=args.depth_levels,
            face_base_depth=args.face_base_depth,
            relative_depth=not args.absolute_depth,
        )
        parts = synth_part_set(cfg)
    save_part_set(parts, args.out)
    print(f"wrote {parts.K} parts ({parts.H}x{parts.W}x{parts.C}) to {args.out}")
    return 0


def cmd_render(args):
    parts, cfg, opts = _render_setup(args)
    frame = render_frame(parts, CameraPose(args.yaw, args.pitch), cfg, opts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ppm(out / "frame_feature.ppm", to_uint8(feature_rgb(frame.feature, args.feature_vis)))
    write_pgm(out / "mask_labels.pgm", frame.labels.astype(np.uint8))
    for k in range(parts.K):
        write_pgm(out / f"mask_k{k}.pgm", to_uint8(frame.mask[..., k]))
    _write_json(out / "frame.json", _frame_record(frame, parts, cfg, opts, args))
    if args.plot:
        from .plotting import frame_panel

        names = [parts.by_index(k).id.name for k in range(parts.K)]
        frame_panel(frame, names, out / "frame_panel.png", args.feature_vis)
    print(f"rendered {cfg.image_w}x{cfg.image_h} frame to {out}")
    return 0


def cmd_sweep(args):
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    parts, cfg, opts = _render_setup(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    yaws = np.linspace(POSE_MEAN - args.yaw_range, POSE_MEAN + args.yaw_range, args.steps)
    frames, records = [], []
    for i, yaw in enumerate(yaws):
        frame = render_frame(parts, CameraPose(float(yaw), args.pitch), cfg, opts)
        frames.append(frame)
        records.append(_frame_record(frame, parts, cfg, opts, args))
    for i, frame in enumerate(frames):
        write_ppm(out / f"frame_{i:03d}_feature.ppm", to_uint8(feature_rgb(frame.feature, args.feature_vis)))
        write_pgm(out / f"frame_{i:03d}_labels.pgm", frame.labels.astype(np.uint8))
    _write_json(out / "sweep.json", {"frames": records})
    if args.plot:
        from .plotting import sweep_panel

        sweep_panel(frames, out / "sweep_panel.png", args.feature_vis)
    print(f"rendered {len(frames)} frames to {out}")
    return 0


def cmd_metrics(args):
    a = load_unit_image(args.a)
    b = load_unit_image(args.b)
    mask = load_mask(args.mask) if args.mask else None
    rec = analysis.difference_metrics(a, b, mask).record()
    print(json.dumps(rec, sort_keys=True))
    return 0


def cmd_check_grad(args):
    if args.parts:
        stacks = [load_part_set(args.parts).depth_stack()]
    else:
        rng = np.random.default_rng(args.seed)
        stacks = [rng.normal(0.0, 2.0, size=(args.K, args.size, args.size)) for _ in range(args.count)]
    worst = None
    for d in stacks:
        rep = analysis.finite_diff_check(
            analysis.ds_loss,
            d,
            lambda x: args.corrupt * analysis.ds_grad(x),
            h=args.h,
            tol=args.tol,
            floor=args.floor,
        )
        if worst is None or rep.max_rel_err > worst.max_rel_err:
            worst = rep
    rec = worst.as_dict()
    rec["n_sets"] = len(stacks)
    print(json.dumps(rec, sort_keys=True))
    if not worst.passed:
        print(f"error: gradient check failed (max rel err {worst.max_rel_err:.3e} > {args.tol:g})", file=sys.stderr)
        return EXIT_FAIL
    return 0


COMMANDS = {
    "gen-synthetic": cmd_gen_synthetic,
    "render": cmd_render,
    "sweep": cmd_sweep,
    "metrics": cmd_metrics,
    "check-grad": cmd_check_grad,
}


# checked in order; first match wins
_ERROR_CODES = (
    (MemoryError, EXIT_MEMORY, "allocation"),
    ((PartSetFormatError, ImageFormatError, FileNotFoundError), EXIT_INPUT, "input"),
    ((NumericError, DomainError), EXIT_NUMERIC, "numeric"),
    ((ConfigError, UsageError, PoseError), EXIT_USAGE, "usage"),
    (PartliftError, EXIT_FAIL, "error"),
)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:
        for types, code, kind in _ERROR_CODES:
            if isinstance(exc, types):
                print(f"partlift: {kind} error: {exc}", file=sys.stderr)
                return code
        raise


if __name__ == "__main__":
    sys.exit(main())
