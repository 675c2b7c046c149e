"""Command-line surface: simulate, segment, evaluate, overlay.

Every segmentation run writes a run.json capturing the fully resolved
configuration and content hashes of its inputs; `segment --from-run` replays
it and reproduces the outputs byte for byte. Options can also come from a
flat `key = value` config file; explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .errors import EvaluationError, InputError, MsnlacError, NumericalError
from .image import load_image, load_mask, save_image, save_mask
from .levelset import NlacParams, classic_ac_run, random_init
from .metrics import export_trace, overlay, rfe, write_rgb
from .multiscale import MsConfig, msnlac_run
from .speckle import make_shapes, simulate

EXIT_USAGE = 2
EXIT_EVAL = 3
EXIT_NUMERIC = 4


@dataclass
class RunConfig:
    """Fully resolved segmentation settings, as persisted in run.json."""

    input: str
    out: str
    gt: str | None = None
    method: str = "nlac"          # nlac | classic
    model: str = "gamma"
    distance: str = "kl"
    js_mode: str = "standard"
    patch_half: int = 7
    nl_radius: int = 30
    nl_sigma: float | None = None
    bins: int = 64
    looks: int = 1
    reg_weight: float = 20.0
    step_size: float | None = None
    stop_tol: float = 1e-3
    max_iters: int = 200
    heaviside_eps: float = 1.0
    scales: int = 3
    seed: int = 0
    pyr_sigma: float = 0.8
    snapshot_every: int = 0
    threads: int = 0              # advisory; results do not depend on it
    overlay_color: str = "255,0,0"
    figure: bool = True


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _parse_config_file(path: str) -> dict:
    """Flat `key = value` lines; '#' starts a comment."""
    out = {}
    p = Path(path)
    if not p.exists():
        raise InputError(f"config file not found: {path}")
    for lineno, line in enumerate(p.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _coerce(value: str, target_type):
    if target_type is bool:
        return value.lower() in ("1", "true", "yes", "on")
    return target_type(value)


_SEGMENT_FIELDS: dict[str, type] = {
    "input": str, "out": str, "gt": str, "method": str, "model": str,
    "distance": str, "js_mode": str, "patch_half": int, "nl_radius": int,
    "nl_sigma": float, "bins": int, "looks": int, "reg_weight": float,
    "step_size": float, "stop_tol": float, "max_iters": int,
    "heaviside_eps": float, "scales": int, "seed": int, "pyr_sigma": float,
    "snapshot_every": int, "threads": int, "overlay_color": str, "figure": bool,
}


def _resolve_segment_config(args) -> RunConfig:
    base: dict = {}
    if args.from_run:
        p = Path(args.from_run)
        if not p.exists():
            raise InputError(f"run file not found: {args.from_run}")
        payload = json.loads(p.read_text())
        base.update(payload.get("config", {}))
    if args.config:
        raw = _parse_config_file(args.config)
        for key, value in raw.items():
            if key not in _SEGMENT_FIELDS:
                raise InputError(f"unknown config key {key!r}")
            base[key] = _coerce(value, _SEGMENT_FIELDS[key])
    for key in _SEGMENT_FIELDS:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            base[key] = flag_val
    if not base.get("input"):
        raise InputError("segment needs an --input image")
    if not base.get("out"):
        raise InputError("segment needs an --out directory")
    cfg = RunConfig(**base)
    if cfg.method not in ("nlac", "classic"):
        raise InputError(f"unknown method {cfg.method!r}")
    return cfg


def cmd_simulate(args) -> int:
    if args.alpha <= 0:
        raise InputError("alpha must be > 0")
    if args.size < 64:
        raise InputError("size must be >= 64")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    phantom = make_shapes(
        args.size, args.size,
        fg_level=args.fg, bg_level=args.bg, gradient_span=args.gradient_span,
    )
    speckled = simulate(phantom.clean, args.alpha, args.seed)
    ext = ".pgm" if args.format == "pgm16" else ".f32"
    save_image(phantom.clean, out / f"clean{ext}")
    save_image(speckled, out / f"speckled{ext}")
    save_mask(phantom.gt_mask, out / "gt.pgm")
    print(f"wrote clean{ext}, speckled{ext}, gt.pgm in {out}")
    return 0


def _run_segmentation(cfg: RunConfig, out: Path):
    img = load_image(cfg.input)
    gt = load_mask(cfg.gt) if cfg.gt else None
    if gt is not None and gt.shape != img.shape:
        raise EvaluationError(f"gt dims {gt.shape} != image dims {img.shape}")
    nlac = NlacParams(
        reg_weight=cfg.reg_weight,
        step_size=cfg.step_size,
        stop_tol=cfg.stop_tol,
        max_iters=cfg.max_iters,
        epsilon=cfg.heaviside_eps,
        distance=cfg.distance,
        js_mode=cfg.js_mode,
    )
    if cfg.method == "classic":
        phi0 = random_init(img.width, img.height, cfg.seed, epsilon=cfg.heaviside_eps)
        ls, trace = classic_ac_run(
            img, phi0, nlac, gt=gt,
            snapshot_every=cfg.snapshot_every, snapshot_prefix=str(out / "phi_L0"),
        )
        return img, gt, ls.mask, [trace]
    ms = MsConfig(
        levels=cfg.scales,
        seed=cfg.seed,
        nlac=nlac,
        patch_half=cfg.patch_half,
        nl_radius=cfg.nl_radius,
        window_sigma=cfg.nl_sigma,
        model=cfg.model,
        bins=cfg.bins,
        looks=cfg.looks,
        sigma0=cfg.pyr_sigma,
    )
    mask, traces = msnlac_run(
        img, ms, gt=gt, snapshot_every=cfg.snapshot_every, snapshot_dir=out
    )
    return img, gt, mask, traces


def cmd_segment(args) -> int:
    cfg = _resolve_segment_config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    img, gt, mask, traces = _run_segmentation(cfg, out)

    save_mask(mask, out / "mask.pgm")
    color = tuple(int(c) for c in cfg.overlay_color.split(","))
    write_rgb(overlay(img, mask, color), out / "overlay.png")
    export_trace(traces, out / "trace.csv")
    if cfg.figure:
        from .report import save_convergence_figure

        save_convergence_figure(traces, out / "convergence.png")

    run_payload = {
        "tool": "msnlac",
        "version": __version__,
        "command": "segment",
        "config": asdict(cfg),
        "inputs": {
            cfg.input: _sha256(Path(cfg.input)),
            **({cfg.gt: _sha256(Path(cfg.gt))} if cfg.gt else {}),
        },
    }
    (out / "run.json").write_text(json.dumps(run_payload, indent=2) + "\n")
    if gt is not None:
        print(f"RFE {rfe(mask, gt):.4f}")
    print(f"outputs in {out}")
    return 0


def cmd_evaluate(args) -> int:
    mask = load_mask(args.mask)
    gt = load_mask(args.gt)
    if mask.shape != gt.shape:
        raise EvaluationError(
            f"mask is {mask.shape[1]}x{mask.shape[0]} but gt is "
            f"{gt.shape[1]}x{gt.shape[0]}"
        )
    print(f"{rfe(mask, gt):.4f}")
    return 0


def cmd_overlay(args) -> int:
    img = load_image(args.input)
    mask = load_mask(args.mask)
    color = tuple(int(c) for c in args.color.split(","))
    write_rgb(overlay(img, mask, color), args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="msnlac",
        description="Non-local active contour segmentation for speckled images.",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="synthesize a speckled phantom")
    sim.add_argument("--size", type=int, default=512, help="square canvas side")
    sim.add_argument("--alpha", type=float, default=4.0, help="gamma shape of the speckle")
    sim.add_argument("--fg", type=float, default=4.0, help="object reflectivity")
    sim.add_argument("--bg", type=float, default=1.0, help="background reflectivity")
    sim.add_argument("--gradient-span", type=float, default=0.0,
                     help="reflectivity ramp along the horseshoe arc")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--format", choices=("f32", "pgm16"), default="f32")
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    seg = sub.add_parser("segment", help="segment an image")
    seg.add_argument("--input", help="input image (PGM or raw float)")
    seg.add_argument("--gt", help="ground-truth mask for RFE tracing")
    seg.add_argument("--out", help="output directory")
    seg.add_argument("--method", choices=("nlac", "classic"))
    seg.add_argument("--model", choices=("lognormal", "rayleigh", "gamma", "weibull", "ga0"))
    seg.add_argument("--distance", choices=("kl", "hellinger", "tv", "js", "em"))
    seg.add_argument("--js-mode", dest="js_mode", choices=("standard", "verbatim"))
    seg.add_argument("--patch-half", dest="patch_half", type=int, help="half patch size")
    seg.add_argument("--nl-radius", dest="nl_radius", type=int,
                     help="interaction window radius (window side = 2r+1)")
    seg.add_argument("--nl-sigma", dest="nl_sigma", type=float,
                     help="window Gaussian scale (default radius/2)")
    seg.add_argument("--bins", type=int, help="PMF bin count")
    seg.add_argument("--looks", type=int, help="looks for the ga0 model")
    seg.add_argument("--reg-weight", dest="reg_weight", type=float,
                     help="length penalty weight")
    seg.add_argument("--step-size", dest="step_size", type=float,
                     help="descent step (default: auto halving from 0.1)")
    seg.add_argument("--stop-tol", dest="stop_tol", type=float,
                     help="energy-change stop threshold")
    seg.add_argument("--max-iters", dest="max_iters", type=int)
    seg.add_argument("--heaviside-eps", dest="heaviside_eps", type=float,
                     help="Heaviside sharpness")
    seg.add_argument("--scales", type=int, help="pyramid level count (1 = single scale)")
    seg.add_argument("--seed", type=int)
    seg.add_argument("--pyr-sigma", dest="pyr_sigma", type=float,
                     help="pyramid pre-smoothing scale")
    seg.add_argument("--snapshot-every", dest="snapshot_every", type=int,
                     help="dump phi every k iterations (0 = never)")
    seg.add_argument("--threads", type=int, help="worker threads (speed only)")
    seg.add_argument("--overlay-color", dest="overlay_color")
    seg.add_argument("--no-figure", dest="figure", action="store_false", default=None,
                     help="skip the convergence figure")
    seg.add_argument("--config", help="flat key = value settings file")
    seg.add_argument("--from-run", dest="from_run", help="replay a run.json")
    seg.set_defaults(func=cmd_segment)

    ev = sub.add_parser("evaluate", help="print the region fitting error")
    ev.add_argument("--mask", required=True)
    ev.add_argument("--gt", required=True)
    ev.set_defaults(func=cmd_evaluate)

    ov = sub.add_parser("overlay", help="draw a mask boundary over an image")
    ov.add_argument("--input", required=True)
    ov.add_argument("--mask", required=True)
    ov.add_argument("--out", required=True)
    ov.add_argument("--color", default="255,0,0")
    ov.set_defaults(func=cmd_overlay)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except EvaluationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, MsnlacError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
