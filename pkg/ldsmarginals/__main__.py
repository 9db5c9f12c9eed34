"""Command-line interface for ldsmarginals.

Serves as the main entry point when running `python -m ldsmarginals`.
Subcommands:

    points       write a lattice or grid point set as CSV
    project      write per-axis partition means of a target on a lattice
    marginalize  run one method end to end (config file plus overrides)
    compare      KL and Hellinger between two marginal descriptors
    study        convergence study over several lattice sizes

Library failures are logged and turned into exit status 1.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Sequence

from .config import ExperimentConfig, load_config
from .errors import ConfigError, LdsMarginalsError
from .experiment import build_point_set, convergence_study, resolve_region, run_experiment
from .metrics import METRIC_NODES, compare_marginals
from .outputs import load_marginal, write_comparison_csv, write_points_csv, write_projection_csv
from .pointset import generate_grid, scale_to_region
from .projection import evaluate_cloud, partition_means, project_axis
from .spec_utils import parse_method, parse_region, parse_target_spec
from .targets import find_mode_hessian

logger = logging.getLogger(__name__)

# flags that share their name with an ExperimentConfig field
_OVERRIDES = (
    "target", "method", "points", "alpha", "thin", "grid_n", "partitions", "region_sd",
    "oracle", "dense_n", "metric_grid", "output", "study_points", "study_methods",
)


def _experiment_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config", help="Path to an experiment YAML file")
    parser.add_argument("-t", "--target", help="Target spec, e.g. skewed:shapes=1,2,3,4,5")
    parser.add_argument("-N", "--points", type=int, help="Lattice size N")
    parser.add_argument("-a", "--alpha", type=int, help="Generating constant")
    parser.add_argument("--search-alpha", action="store_true",
                        help="Search the generating constant instead of using --alpha")
    parser.add_argument("--thin", type=int, help="Halvings applied to the lattice")
    parser.add_argument("--partitions", type=int, help="Number of partitions n")
    parser.add_argument("--region-sd", type=float,
                        help="Region half-width in standard deviations")
    parser.add_argument("--region", help="Explicit region a1,b1,a2,b2,...")
    parser.add_argument("--oracle", choices=["auto", "analytic", "dense", "none"])
    parser.add_argument("--dense-n", type=int, help="Points per axis of the dense-grid oracle")
    parser.add_argument("--metric-grid", type=int, help="Nodes of the metric grid")
    parser.add_argument("-o", "--output", help="Output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ldsmarginals",
        description="Approximate 1-D marginals with low-discrepancy point sets",
    )
    parser.add_argument(
        "--log-level", default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging verbosity"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    points = sub.add_parser("points", help="Write a point set as CSV")
    points.add_argument("--kind", choices=["korobov", "grid"], default="korobov")
    points.add_argument("-s", "--dim", type=int, required=True, help="Dimension s")
    points.add_argument("-N", "--points", "--n", dest="points", type=int, default=512,
                        help="Lattice size N")
    points.add_argument("-a", "--alpha", type=int, default=19, help="Generating constant")
    points.add_argument("--search-alpha", action="store_true",
                        help="Search the generating constant instead of using --alpha")
    points.add_argument("--grid-n", type=int, default=4, help="Grid points per axis")
    points.add_argument("--extensible", action="store_true",
                        help="Mark the lattice as extensible (thinnable) instead of plain")
    points.add_argument("--thin", type=int, default=0, help="Halvings applied to the lattice")
    points.add_argument("--region", help="Scale into a1,b1,a2,b2,... instead of [0,1)^s")
    points.add_argument("-o", "--output", default="points.csv", help="CSV file to write")

    project = sub.add_parser("project", help="Write partition means of a target")
    _experiment_args(project)
    project.add_argument("--file", default="projection.csv",
                         help="CSV file name inside the output directory")

    marginalize = sub.add_parser("marginalize", help="Run one method end to end")
    _experiment_args(marginalize)
    marginalize.add_argument("-m", "--method",
                             help="grid, stm[N], qa, cx<N>, half-gaussian or oracle")
    marginalize.add_argument("--grid-n", type=int, help="Grid points per axis")
    marginalize.add_argument("-x", "--degree", type=int,
                             help="Correction degree x; turns the method into cx<x> or stm<x>")

    compare = sub.add_parser("compare", help="Compare two marginal descriptors")
    compare.add_argument("reference", help="Reference (oracle) descriptor JSON")
    compare.add_argument("approx", help="Approximation descriptor JSON")
    compare.add_argument("--metric-grid", type=int, default=METRIC_NODES)
    compare.add_argument("-o", "--output", default="comparison.csv", help="CSV file to write")

    study = sub.add_parser("study", help="Convergence study over lattice sizes")
    _experiment_args(study)
    study.add_argument("--study-points", type=int, nargs="+", help="Lattice sizes")
    study.add_argument("--study-methods", nargs="+", help="Lattice methods to compare")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Config file (or defaults) with every given CLI flag applied on top."""
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    for name in _OVERRIDES:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if args.region is not None:
        region = parse_region(args.region)
        cfg.region = [v for pair in zip(region.lower, region.upper) for v in map(float, pair)]
    if args.search_alpha:
        cfg.alpha = None
    degree = getattr(args, "degree", None)
    if degree is not None:
        name = parse_method(cfg.method).name
        if name not in ("cx", "stm"):
            raise ConfigError(f"--degree applies to cx and stm, not {name}")
        cfg.method = f"{name}{degree}"
    return cfg


def _cmd_points(args: argparse.Namespace) -> None:
    if args.kind == "grid":
        ps = generate_grid(args.grid_n, args.dim)
    else:
        cfg = ExperimentConfig(points=args.points, thin=args.thin, extensible=args.extensible,
                               alpha=None if args.search_alpha else args.alpha)
        ps = build_point_set(cfg, args.dim)
    if args.region:
        ps = scale_to_region(ps, parse_region(args.region))
    write_points_csv(ps, args.output)
    logger.info(f"wrote {ps.big_n} points to {args.output}")


def _cmd_project(args: argparse.Namespace) -> None:
    cfg = config_from_args(args).validate()
    target = parse_target_spec(cfg.target)
    region = resolve_region(cfg, find_mode_hessian(target))
    cloud = evaluate_cloud(target, scale_to_region(build_point_set(cfg, target.dim), region))
    summaries = [
        partition_means(project_axis(cloud, k), cfg.partitions, *region.axis(k))
        for k in range(target.dim)
    ]
    os.makedirs(cfg.output, exist_ok=True)
    write_projection_csv(summaries, os.path.join(cfg.output, args.file))


def _cmd_marginalize(args: argparse.Namespace) -> None:
    manifest = run_experiment(config_from_args(args))
    for report in manifest.reports:
        logger.info(f"axis {report['axis']}: KL={report['kl']:.6g} "
                    f"H={report['hellinger']:.6g}")


def _cmd_compare(args: argparse.Namespace) -> None:
    report = compare_marginals(load_marginal(args.reference), load_marginal(args.approx),
                               args.metric_grid)
    write_comparison_csv([report], args.output)


def _cmd_study(args: argparse.Namespace) -> None:
    convergence_study(config_from_args(args))


_COMMANDS = {
    "points": _cmd_points,
    "project": _cmd_project,
    "marginalize": _cmd_marginalize,
    "compare": _cmd_compare,
    "study": _cmd_study,
}


def _join_region_values(argv: Sequence[str]) -> list[str]:
    """Turn ``--region -3,3`` into ``--region=-3,3``.

    argparse reads a value starting with "-" as an option unless it is
    attached to its flag.
    """
    joined: list[str] = []
    tokens = iter(argv)
    for token in tokens:
        if token == "--region":
            value = next(tokens, None)
            joined.append(token if value is None else f"--region={value}")
        else:
            joined.append(token)
    return joined


def main(argv: Sequence[str] | None = None) -> int:
    """Main entry point for command-line execution."""
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(_join_region_values(argv))
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _COMMANDS[args.command](args)
    except LdsMarginalsError as exc:
        logger.error(str(exc))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
