"""Command line entry point.

One subcommand per pipeline stage plus ``all``; every invocation is
driven by a config file with flag overrides on top.  Exit codes: 0 on
success, 2 when a prerequisite artifact is missing (its name goes to
stderr), 3 on a config violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .config import ConfigError, PipelineConfig, load_config
from .pipeline import STAGES, MissingArtifact, run_all, run_stage
from .scenes import four_pattern_scene, scene_to_dict, two_pattern_scene

_NAMED_SCENES = {
    "two-pattern": two_pattern_scene,
    "four-pattern": four_pattern_scene,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="morphotopes",
        description="Morphotope delineation and taxonomy over building footprints.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES + ("all",):
        p = sub.add_parser(name, help=f"run the {name} stage" if name != "all" else "run every stage in order")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="artifact directory (default: artifacts)")
        p.add_argument("--workers", type=int, help="parallel workers; never changes outputs")
        p.add_argument("--k", type=int, help="number of taxonomy branches for cut/assign-noise/evaluate")
        p.add_argument("--min-size", type=int, dest="min_size", help="minimum morphotope size (default 75)")
        p.add_argument("--seed", type=int, help="seed for synthetic scenes")
        p.add_argument("--buildings", help="input building footprints GeoJSON")
        p.add_argument("--streets", help="input street segments GeoJSON")
        p.add_argument("--external", help="labelled polygons GeoJSON for evaluation")
        p.add_argument(
            "--scene",
            help="synthetic input: 'two-pattern', 'four-pattern' or a scene JSON file",
        )
        p.add_argument("--discard-noise", action="store_true", dest="discard_noise",
                       help="leave noise cells unassigned")
        p.add_argument("--force", action="store_true", help="re-run even when up to date")
    return parser


def _scene_override(value: str) -> dict:
    if value in _NAMED_SCENES:
        data = scene_to_dict(_NAMED_SCENES[value]())
        del data["seed"]  # let --seed / config seed apply
        return data
    path = Path(value)
    if not path.exists():
        raise ConfigError(f"unknown scene '{value}'")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid scene JSON in {value}: {exc}") from exc


def _apply_overrides(cfg: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    rep: dict = {}
    if args.workers is not None:
        rep["workers"] = args.workers
    if args.k is not None:
        rep["cut_k"] = args.k
    if args.seed is not None:
        rep["seed"] = args.seed
    if args.out is not None:
        rep["out_dir"] = args.out
    if args.buildings is not None:
        rep["buildings_path"] = args.buildings
    if args.streets is not None:
        rep["segments_path"] = args.streets
    if args.external is not None:
        rep["external_path"] = args.external
    if args.scene is not None:
        rep["scene"] = _scene_override(args.scene)
    if args.discard_noise:
        rep["discard_noise"] = True
    if rep:
        cfg = dataclasses.replace(cfg, **rep)
    if args.min_size is not None:
        cfg = dataclasses.replace(
            cfg, regionalize=dataclasses.replace(cfg.regionalize, min_size=args.min_size)
        )
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig()
        cfg = _apply_overrides(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3

    try:
        if args.command == "all":
            ran = run_all(cfg, force=args.force)
        else:
            ran = {args.command: run_stage(cfg, args.command, force=args.force)}
    except MissingArtifact as exc:
        print(f"missing artifact: {exc.artifact}", file=sys.stderr)
        return 2
    for name, did in ran.items():
        print(f"{name}: {'ran' if did else 'skipped (up to date)'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
