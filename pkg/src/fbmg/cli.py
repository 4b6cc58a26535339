"""Command line entry point: ``fbmg denoise ...`` and ``fbmg mri ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Dict, List, Optional

from .bench import DENOISE, MRI, ExperimentSpec, run_experiment

log = logging.getLogger("fbmg")

# flag name -> value type; the ExperimentSpec field is the flag with underscores
_FLAGS = {
    "input": str,
    "size": int,
    "sigma": float,
    "alpha": float,
    "tau-scale": float,
    "tauh-scale": float,
    "m": int,
    "trigger-k": int,
    "omega": float,
    "line-search": str,
    "t": int,
    "lines": int,
    "noise-pixels": int,
    "seed": int,
    "max-iter": int,
    "ref-iters": int,
    "out": str,
}


def read_config(path) -> Dict[str, str]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment.

    Keys may be written with dashes or underscores, with or without a
    leading ``--``.
    """
    values = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, val = line.split("=", 1)
            else:
                parts = line.split(None, 1)
                if len(parts) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 'key = value'")
                key, val = parts
            key = key.strip().lstrip("-").replace("_", "-")
            if key not in _FLAGS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = val.strip()
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbmg",
        description="Compare forward-backward and two-grid FBMG on TV denoising or MRI.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind, help_ in ((DENOISE, "TV denoising of a noisy image"),
                        (MRI, "TV reconstruction from subsampled Fourier lines")):
        p = sub.add_parser(kind, help=help_)
        p.add_argument("--config", help="flat key = value file; flags override it")
        p.add_argument("--input", help="clean image (default: built-in test image)")
        p.add_argument("--size", type=int, help="working resolution after centre crop (default 64)")
        p.add_argument("--sigma", type=float, help="noise level (0.4 denoise, 50 mri)")
        p.add_argument("--alpha", type=float, help="TV weight (0.85 denoise, 1.15 mri)")
        p.add_argument("--tau-scale", type=float, help="fine step as a multiple of 1/L (0.95)")
        p.add_argument("--tauh-scale", type=float, help="coarse step as a multiple of 1/L_H (1.95)")
        p.add_argument("--m", type=int, help="coarse steps per correction (6)")
        p.add_argument("--trigger-k", type=int, help="correct during the first K iterations (110 / 500)")
        p.add_argument("--omega", type=float, help="line-search scaling (0.4)")
        p.add_argument("--line-search", choices=("projected", "fixed"))
        p.add_argument("--seed", type=int, help="noise and mask seed (0)")
        p.add_argument("--max-iter", type=int, help="iterations for the FB and FBMG runs (2000)")
        p.add_argument("--ref-iters", type=int, help="iterations of the reference FBMG run (20000)")
        p.add_argument("--out", help="output directory")
        if kind == MRI:
            p.add_argument("--t", type=int, help="number of masks (21)")
            p.add_argument("--lines", type=int, help="lines per mask (150 scaled to the grid)")
            p.add_argument("--noise-pixels", type=int,
                           help="grid size the noise level refers to (583*493)")
    return parser


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    values = {}
    if args.config:
        for key, raw in read_config(args.config).items():
            values[key] = _FLAGS[key](raw)
    for key in _FLAGS:
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            values[key] = val
    return ExperimentSpec(kind=args.kind, **{k.replace("-", "_"): v for k, v in values.items()})


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = spec_from_args(args)
    except (OSError, ValueError) as err:
        print(f"fbmg: {err}", file=sys.stderr)
        return 2
    if spec.out is None:
        spec.out = f"fbmg-{spec.kind}"
    try:
        result = run_experiment(spec)
    except (OSError, ValueError) as err:
        print(f"fbmg: {err}", file=sys.stderr)
        return 1
    print(f"v* = {result.vstar!r}")
    print("rho      fb_icn   fbmg_icn   fb_time    fbmg_time")
    for row in result.summary:
        print(f"{row['rho']:<8g} {row['fb_icn']:<8g} {row['fbmg_icn']:<10g} "
              f"{row['fb_time']:<10.4g} {row['fbmg_time']:.4g}")
    print(f"artifacts in {spec.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
