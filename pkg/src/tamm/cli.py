"""Command-line entry point: ``tamm {synth,enrich,match,midpoint-test,align-report}``.

Settings come from, in decreasing precedence, command-line flags, an
optional flat ``key = value`` config file (``--config``) and built-in
defaults.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import __version__
from .enrich import SpeedModel, apply_model, observations, read_model, spread_speeds, write_model
from .eval import accuracy, alignment_report, midpoint_suite, write_alignment_csv, write_summary
from .formats import TrajectoryFormatError, read_trajectories, read_truth, write_matched, write_trajectories, write_truth
from .matcher import DEFAULT_K, MatchError
from .pipeline import MatchedTrajectory, RejectedTrajectory, batch_match, match_points, normalize_heuristic
from .roadnet import NetworkFormatError, load_network, write_network
from .synth import SynthConfig, synth_world

log = logging.getLogger("tamm")

HEURISTIC_CHOICES = ("time-aware", "shortest", "fastest")

DEFAULTS = {
    "network": None,
    "trajectories": None,
    "model": None,
    "truth": None,
    "heuristic": None,
    "knn": DEFAULT_K,
    "workers": 1,
    "seed": 0,
    "out": ".",
    "grid_n": SynthConfig.grid_n,
    "spacing_m": SynthConfig.spacing_m,
    "n_trajectories": SynthConfig.n_trajectories,
    "sampling_s": SynthConfig.sampling_s,
    "noise_m": SynthConfig.noise_m,
    "detour_fraction": SynthConfig.detour_fraction,
    "fastest_fraction": SynthConfig.fastest_fraction,
    "min_fixes": SynthConfig.min_fixes,
}

INT_KEYS = {"knn", "workers", "seed", "grid_n", "n_trajectories", "min_fixes"}
FLOAT_KEYS = {"spacing_m", "sampling_s", "noise_m", "detour_fraction", "fastest_fraction"}


class CliError(Exception):
    """Fatal, user-facing error; ``code`` becomes the exit status."""

    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise CliError(f"config file not found: {path}", 2)
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in DEFAULTS:
            raise CliError(f"{path}: line {lineno}: expected key = value with a known key, got {raw!r}", 2)
        value = value.strip()
        try:
            if key in INT_KEYS:
                out[key] = int(value)
            elif key in FLOAT_KEYS:
                out[key] = float(value)
            else:
                out[key] = value
        except ValueError:
            raise CliError(f"{path}: line {lineno}: bad value for {key}: {value!r}", 2) from None
    return out


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Merge flags over config file over defaults, then validate."""
    merged = dict(DEFAULTS)
    if args.config:
        merged.update(read_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    cfg = argparse.Namespace(**merged, command=args.command)
    if cfg.knn < 1:
        raise CliError("--knn must be >= 1", 2)
    if cfg.workers < 1:
        raise CliError("--workers must be >= 1", 2)
    return cfg


def _require(path, what: str) -> Path:
    if path is None:
        raise CliError(f"--{what} is required", 2)
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} file not found: {p}", 2)
    return p


def _out_dir(cfg) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _heuristics(cfg, default):
    names = cfg.heuristic if cfg.heuristic else default
    if isinstance(names, str):
        names = [n for n in names.replace(",", " ").split() if n]
    try:
        return [normalize_heuristic(n) for n in names]
    except ValueError as exc:
        raise CliError(str(exc), 2) from None


def _load_inputs(cfg, need_model: bool, use_model: bool = True):
    """Validate every path first, then load network (+ model).

    ``use_model=False`` ignores ``--model`` (for ``enrich`` it names the output).
    """
    net_path = _require(cfg.network, "network")
    traj_path = _require(cfg.trajectories, "trajectories")
    model_path = _require(cfg.model, "model") if (need_model or (use_model and cfg.model)) else None
    net = load_network(net_path)
    if model_path is not None:
        model = read_model(model_path)
        try:
            net = apply_model(net, model)
        except KeyError as exc:
            raise CliError(f"{model_path}: {exc.args[0]}") from None
    return net, traj_path


def cmd_synth(cfg) -> int:
    scfg = {k: getattr(cfg, k) for k in ("grid_n", "spacing_m", "n_trajectories", "sampling_s", "noise_m", "detour_fraction", "fastest_fraction", "min_fixes")}
    if scfg["grid_n"] < 2:
        raise CliError("grid_n must be >= 2", 2)
    world = synth_world(seed=cfg.seed, **scfg)
    out = _out_dir(cfg)
    write_network(world.network, out / "network.csv")
    write_trajectories(world.trajectories, out / "trajectories.csv", world.network.projection)
    write_truth(world.truth, out / "truth.csv")
    print(f"wrote {len(world.network.segments)} segments, {len(world.trajectories)} trajectories to {out}")
    return 0


def cmd_enrich(cfg) -> int:
    net, traj_path = _load_inputs(cfg, need_model=False, use_model=False)
    model = SpeedModel()
    n_traj = n_fix = n_speed = rejected = 0
    for traj in read_trajectories(traj_path, net.projection):
        n_traj += 1
        try:
            points = match_points(net, traj, cfg.knn)
        except (MatchError, ValueError) as exc:
            log.warning("trajectory %s skipped: %s", traj.id, exc)
            rejected += 1
            continue
        n_fix += len(points)
        for obs in observations(points):
            n_speed += 1
            model.accumulate(obs)
    if n_speed == 0:
        log.warning("no fix carries a speed value; every segment falls back to its speed limit")
    spread_speeds(net, model)
    out = _out_dir(cfg)
    model_path = Path(cfg.model) if cfg.model else out / "speed_model.csv"
    model_path.parent.mkdir(parents=True, exist_ok=True)
    write_model(model, model_path)
    summary = {
        "segments": len(model.entries),
        "provenance": model.provenance_counts(),
        "spread_rounds": model.rounds,
        "trajectories": n_traj,
        "rejected": rejected,
        "fixes": n_fix,
        "fixes_with_speed": n_speed,
    }
    write_summary(summary, out / "provenance.json")
    print(f"wrote speed model for {len(model.entries)} segments to {model_path}")
    return 0


def cmd_match(cfg) -> int:
    net, traj_path = _load_inputs(cfg, need_model=True)
    (heuristic,) = _heuristics(cfg, ["time_aware"])[:1]
    out = _out_dir(cfg)
    rejected: list[RejectedTrajectory] = []

    def results():
        for r in batch_match(net, read_trajectories(traj_path, net.projection), heuristic, cfg.workers, cfg.knn):
            if isinstance(r, RejectedTrajectory):
                rejected.append(r)
            else:
                yield r

    with (out / "matched.csv").open("w", newline="", encoding="utf-8") as fh:
        pairs = write_matched(results(), fh)
    for r in rejected:
        print(f"rejected trajectory {r.trajectory_id}: {r.reason}", file=sys.stderr)
    print(f"wrote {pairs} pairs to {out / 'matched.csv'} ({len(rejected)} trajectories rejected)")
    return 0


def cmd_midpoint(cfg) -> int:
    net, traj_path = _load_inputs(cfg, need_model=False)
    heuristics = _heuristics(cfg, ["time_aware", "shortest", "fastest"])
    trajs = list(read_trajectories(traj_path, net.projection))
    res = midpoint_suite(net, trajs, heuristics, cfg.knn, cfg.workers)
    report = {h.replace("_", "-"): s.as_dict() for h, s in res.items()}
    out = _out_dir(cfg)
    write_summary(report, out / "midpoint.json")
    for h, s in report.items():
        score = "null" if s["score"] is None else f"{s['score']:.4f}"
        print(f"{h}: score {score} over {s['hidden']} hidden fixes ({s['skipped']} trajectories skipped)")
    return 0


def cmd_align(cfg) -> int:
    net, traj_path = _load_inputs(cfg, need_model=False)
    (heuristic,) = _heuristics(cfg, ["time_aware"])[:1]
    truth = read_truth(_require(cfg.truth, "truth")) if cfg.truth else None
    results = [r for r in batch_match(net, read_trajectories(traj_path, net.projection), heuristic, cfg.workers, cfg.knn)]
    matched = [r for r in results if isinstance(r, MatchedTrajectory)]
    report = alignment_report(matched)
    out = _out_dir(cfg)
    write_alignment_csv(report, out / "alignment.csv")
    acc = None
    if truth is not None:
        scores = [accuracy(mt, truth[mt.trajectory_id]) for mt in matched if truth.get(mt.trajectory_id)]
        acc = math.fsum(scores) / len(scores) if scores else None
    summary = {
        "heuristic": heuristic.replace("_", "-"),
        "mean_delta_pct": report.mean_delta_pct,
        "pairs": report.pairs,
        "trajectories": len(matched),
        "rejected": len(results) - len(matched),
        "accuracy": acc,
    }
    write_summary(summary, out / "summary.json")
    print(f"{summary['heuristic']}: mean delta {report.mean_delta_pct:.2f}% over {report.pairs} pairs")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "enrich": cmd_enrich,
    "match": cmd_match,
    "midpoint-test": cmd_midpoint,
    "align-report": cmd_align,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--network", help="network CSV")
    common.add_argument("--trajectories", help="trajectory CSV")
    common.add_argument("--model", help="speed model CSV (output of enrich, input elsewhere)")
    common.add_argument("--truth", help="ground-truth CSV (align-report accuracy)")
    common.add_argument("--heuristic", action="append", choices=HEURISTIC_CHOICES, help="repeatable for midpoint-test")
    common.add_argument("--knn", type=int, help=f"candidate segments per fix (default {DEFAULT_K})")
    common.add_argument("--workers", type=int, help="worker processes (default 1)")
    common.add_argument("--seed", type=int, help="synth seed (default 0)")
    common.add_argument("--out", help="output directory (default .)")
    common.add_argument("-v", "--verbose", action="store_true")
    synth = argparse.ArgumentParser(add_help=False)
    synth.add_argument("--grid-n", dest="grid_n", type=int)
    synth.add_argument("--spacing-m", dest="spacing_m", type=float)
    synth.add_argument("--n-trajectories", dest="n_trajectories", type=int)
    synth.add_argument("--sampling-s", dest="sampling_s", type=float)
    synth.add_argument("--noise-m", dest="noise_m", type=float)
    synth.add_argument("--detour-fraction", dest="detour_fraction", type=float)
    synth.add_argument("--fastest-fraction", dest="fastest_fraction", type=float)
    synth.add_argument("--min-fixes", dest="min_fixes", type=int)

    parser = argparse.ArgumentParser(prog="tamm", description="Time-aware map matching of low-rate GPS trajectories.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common, synth], help="generate a synthetic grid world")
    sub.add_parser("enrich", parents=[common], help="estimate per-segment speeds")
    sub.add_parser("match", parents=[common], help="map-match trajectories")
    sub.add_parser("midpoint-test", parents=[common], help="middle-point coherence test")
    sub.add_parser("align-report", parents=[common], help="path vs GPS travel-time alignment")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except CliError as exc:
        print(f"tamm: error: {exc}", file=sys.stderr)
        return exc.code
    except (NetworkFormatError, TrajectoryFormatError, ValueError, OSError) as exc:
        print(f"tamm: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
