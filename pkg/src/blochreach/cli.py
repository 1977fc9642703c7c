"""``blochreach`` command line: trajectories, sweeps, coverage comparison.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from typing import Dict, List, Optional

from . import __version__
from . import config as cfgmod
from . import output, svg
from .config import ConfigError
from .dynamics import IntegrationError, sample_linear_trajectory, sample_trajectory
from .lyapunov import run_controlled
from .qcore import transformed_initial_state
from .reach import SweepError, coverage, coverage_table, run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
WORKERS_ENV = "BLOCHREACH_WORKERS"

log = logging.getLogger("blochreach")

# flag name -> (section, key)
FLAG_KEYS = {
    "mode": ("system", "mode"),
    "R": ("system", "R"),
    "v": ("system", "v"),
    "C": ("system", "C"),
    "theta": ("system", "theta"),
    "phi": ("system", "phi"),
    "t_stop": ("system", "t_stop"),
    "t_step": ("system", "t_step"),
    "t_max": ("sweep", "t_max"),
    "kappa": ("control", "kappa"),
    "perturbation_angle": ("control", "perturbation_angle"),
    "dt": ("integrator", "dt"),
    "out": ("output", "dir"),
    "label": ("output", "label"),
}


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _add_config_args(p: argparse.ArgumentParser, sweep: bool) -> None:
    p.add_argument("--config", help="INI config file (or a manifest.json from an earlier run)")
    p.add_argument("--preset", choices=sorted(cfgmod.PRESETS), help="named parameter preset")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override any config key; repeatable")
    p.add_argument("--mode", help="linear | nonlinear | controlled (default: linear)")
    p.add_argument("--C", help="nonlinear strength (default: 0)")
    p.add_argument("--theta", help="frame angle theta selecting the initial state F|e> (default: 0)")
    p.add_argument("--phi", help="frame angle phi (default: 0)")
    p.add_argument("--kappa", help="Lyapunov gain (default: 0)")
    p.add_argument("--perturbation-angle", dest="perturbation_angle",
                   help="target initial-state tilt about the Bloch y axis (default: 0)")
    p.add_argument("--dt", help="RK4 step (default: 0.001)")
    p.add_argument("--out", help="output directory (default: out)")
    if sweep:
        p.add_argument("--t-max", dest="t_max", help="end of the sampled time window (default: 4)")
        p.add_argument("--label", help="label stored in coverage.json")
        p.add_argument("--workers", type=int, default=None,
                       help=f"worker processes (default: ${WORKERS_ENV} or 1)")
        p.add_argument("--svg", action="store_true", help="also write two orthographic SVG views")
    else:
        p.add_argument("--R", help="level splitting (default: 0)")
        p.add_argument("--v", help="coupling (default: pi)")
        p.add_argument("--t-stop", dest="t_stop", help="last sample time (default: 1)")
        p.add_argument("--t-step", dest="t_step", help="sample spacing (default: 0.5)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="blochreach",
        description="Two-level linear, mean-field and Lyapunov-controlled dynamics; Bloch-sphere reachable sets.",
        epilog="Every key and its default is listed by `blochreach defaults`.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("trajectory", help="integrate one trajectory and write trajectory.csv")
    _add_config_args(p, sweep=False)

    p = sub.add_parser("sweep", help="sweep the (R, v) grid; write cloud.csv, coverage.json, manifest.json")
    _add_config_args(p, sweep=True)

    p = sub.add_parser("compare", help="tabulate coverage.json files and write compare.json")
    p.add_argument("files", nargs="+")
    p.add_argument("--labels", help="comma separated labels (default: label field or parent directory)")
    p.add_argument("--output", default="compare.json", help="path of the JSON table (default: compare.json)")

    p = sub.add_parser("defaults", help="write the full default configuration (defaults.cfg)")
    p.add_argument("--preset", choices=sorted(cfgmod.PRESETS))
    p.add_argument("-o", "--output", default="defaults.cfg", help="'-' for standard output")
    return parser


def _overrides(args) -> Dict[str, Dict[str, str]]:
    out: Dict[str, Dict[str, str]] = {}
    for item in args.set:
        section, key, value = cfgmod.parse_assignment(item)
        out.setdefault(section, {})[key] = value
    for flag, (section, key) in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            out.setdefault(section, {})[key] = str(value)
    return out


def _load_config(args):
    path = args.config
    base = None
    if path is not None and path.endswith(".json"):
        try:
            with open(path, encoding="utf-8") as fh:
                base = json.load(fh)["config"]
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"config: cannot read manifest {path}: {exc}") from exc
        path = None
    cp = cfgmod.load(path=path, preset=args.preset, overrides=base)
    overrides = _overrides(args)
    if overrides:
        cfgmod.merge(cp, overrides, "command line")
    cfgmod.validate(cp)
    return cp


def _out_dir(cp) -> str:
    d = cp.get("output", "dir")
    os.makedirs(d, exist_ok=True)
    return d


def _workers(args) -> int:
    workers = args.workers
    if workers is None:
        env = os.environ.get(WORKERS_ENV, "1")
        try:
            workers = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}: expected an integer, got {env!r}")
    if workers < 1:
        raise ConfigError(f"--workers: must be >= 1, got {workers}")
    return workers


def cmd_trajectory(args) -> int:
    cp = _load_config(args)
    mode = cfgmod.mode(cp)
    params = cfgmod.hamiltonian_params(cp)
    s0 = transformed_initial_state(cfgmod.transform_params(cp))
    grid = cfgmod.trajectory_grid(cp)
    icfg = cfgmod.integrator_config(cp)
    run = None
    if mode == "linear":
        traj = sample_linear_trajectory(params, s0, grid)
    elif mode == "nonlinear":
        traj = sample_trajectory(params, s0, grid, icfg)
    else:
        run = run_controlled(params, s0, cfgmod.control_config(cp), grid, icfg)
        traj = run.trajectory
    path = os.path.join(_out_dir(cp), "trajectory.csv")
    output.atomic_write(path, output.trajectory_csv(traj, run))
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cp = _load_config(args)
    workers = _workers(args)
    scfg = cfgmod.sweep_config(cp)
    part = cfgmod.partition(cp)
    label = cp.get("output", "label") or (args.preset or scfg.mode)
    start = time.perf_counter()
    cloud = run_sweep(scfg, workers=workers)
    report = coverage(cloud, part)
    elapsed = time.perf_counter() - start

    out = _out_dir(cp)
    files = {
        "cloud": os.path.join(out, "cloud.csv"),
        "coverage": os.path.join(out, "coverage.json"),
    }
    want_svg = args.svg or cfgmod._bool(cp, "output", "svg")
    if want_svg:
        files["svg_plus_y"] = os.path.join(out, "cloud_view_plus_y.svg")
        files["svg_minus_y"] = os.path.join(out, "cloud_view_minus_y.svg")
    summary = output.coverage_summary(report, part, scfg, label)
    summary["skipped_nodes"] = [list(n) for n in cloud.skipped]
    output.atomic_write(files["cloud"], output.cloud_csv(cloud))
    output.atomic_write(files["coverage"], output.dump_json(summary))
    if want_svg:
        for key, side in (("svg_plus_y", 1.0), ("svg_minus_y", -1.0)):
            output.atomic_write(files[key], svg.view_svg(cloud.p, side, title=label))
    manifest = {
        "config": cfgmod.as_dict(cp),
        "version": __version__,
        "wall_clock_seconds": elapsed,
        "outputs": files,
        "integrator": summary["integrator"],
        "workers": workers,
        "chunk_size": scfg.chunk_size,
    }
    output.atomic_write(os.path.join(out, "manifest.json"), output.dump_json(manifest))
    print(f"{label}: coverage {report.coverage:.6f} ({report.occupied_cells}/{report.total_cells} cells), "
          f"{len(cloud)} points in {elapsed:.1f} s")
    return EXIT_OK


def cmd_compare(args) -> int:
    labels: Optional[List[str]] = None
    if args.labels:
        labels = [s.strip() for s in args.labels.split(",")]
        if len(labels) != len(args.files):
            raise ConfigError("--labels: need one label per file")
    entries = []
    for i, path in enumerate(args.files):
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
            value = float(data["coverage"])
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: not a readable coverage.json ({exc})") from exc
        if labels is not None:
            label = labels[i]
        else:
            label = data.get("label") or os.path.basename(os.path.dirname(os.path.abspath(path)))
        entries.append((label, value))
    table = coverage_table(entries)
    print(table.format())
    output.atomic_write(args.output, output.dump_json(table.to_dict()))
    return EXIT_OK


def cmd_defaults(args) -> int:
    cp = cfgmod.load(preset=args.preset)
    text = cfgmod.dumps(cp)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        output.atomic_write(args.output, text)
    return EXIT_OK


COMMANDS = {
    "trajectory": cmd_trajectory,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "defaults": cmd_defaults,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"blochreach: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, SweepError) as exc:
        print(f"blochreach: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
