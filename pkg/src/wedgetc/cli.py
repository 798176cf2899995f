"""Command-line entry point: ``wedgetc {subspace,spectral,gd,delta-probe,replay}``."""

from __future__ import annotations

import argparse
import sys

from .harness import ConfigError, ExperimentConfig, emit_outputs, median_table, replay, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2
_KIND = {"subspace": "subspace", "spectral": "spectral", "gd": "gd", "delta-probe": "delta_probe"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wedgetc", description="Wedge-versus-uniform sampling experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _KIND:
        p = sub.add_parser(name, help=f"run a {name} sweep")
        p.add_argument("--config", help="JSON file with ExperimentConfig fields")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes (WEDGE_THREADS overrides)")
        p.add_argument("--out-dir", help="output directory")
        p.add_argument("--plots", action="store_true", help="also write SVG plots")
        p.add_argument("--trials", type=int, help="trials per cell")
    p = sub.add_parser("replay", help="rerun a manifest and compare CSV digests")
    p.add_argument("manifest")
    p.add_argument("--out-dir", help="where to write the rerun (default: the manifest's own)")
    p.add_argument("--threads", type=int, default=1)
    return parser


def _config(args) -> ExperimentConfig:
    d = {}
    if args.config:
        d = ExperimentConfig.from_json(args.config).to_dict()
    d["experiment"] = _KIND[args.command]
    for key in ("seed", "trials"):
        if getattr(args, key) is not None:
            d[key] = getattr(args, key)
    if args.out_dir:
        d["out_dir"] = args.out_dir
    if args.plots:
        d["plots"] = True
    return ExperimentConfig.from_dict(d)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "replay":
            same, paths = replay(args.manifest, args.out_dir, args.threads)
            print(f"{'identical' if same else 'DIFFERENT'}: {paths['results']}")
            return EXIT_OK if same else EXIT_CONFIG
        cfg = _config(args)
        rows, traces = run_experiment(cfg, args.threads)
        paths = emit_outputs(rows, cfg, traces)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for key, value in sorted(median_table(rows).items()):
        print(",".join(str(k) for k in key), f"median={value:.4g}")
    print(f"wrote {paths['results']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
