"""End-to-end experiment runs and convergence studies.

run_experiment() drives one configured method through the stages
target -> mode -> points -> marginalize -> oracle -> compare -> write and
records what it did in a RunManifest. Library failures inside a stage are
re-raised as StageError naming the stage.

convergence_study() builds the largest lattice once, thins it for every
smaller N, adds grids of matching budget, and tabulates the per-axis
distance of every method to the oracle.
"""
from __future__ import annotations

import logging
import math
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from . import __version__
from .baselines import dense_grid_oracle, half_gaussian_baseline, oracle_marginals
from .config import ExperimentConfig, dump_config
from .errors import ConfigError, LdsMarginalsError, StageError
from .marginalize import (DEFAULT_STM_DEGREE, MIN_GRID_POINTS, MarginalApprox,
                          marginalize_grid, marginals_from_partitions,
                          marginals_from_stm_cloud)
from .metrics import DistanceReport, compare_marginals
from .outputs import write_comparison_csv, write_manifest, write_marginal, write_study_csv
from .pointset import (IntegrationRegion, PointSet, generate_korobov, scale_to_region,
                       search_generating_constant, thin_lattice)
from .projection import EvaluationCloud, evaluate_cloud
from .spec_utils import MethodSpec, parse_method, parse_target_spec
from .targets import ModeSummary, TargetDensity, build_region, find_mode_hessian, region_from_bounds

logger = logging.getLogger(__name__)

# conditional slices per axis: base value plus two displacements, on each side
_HALF_GAUSSIAN_EVALUATIONS = 6


@dataclass
class RunManifest:
    """What a run did and where it wrote it."""
    config: dict[str, Any]
    version: str
    target: str
    method: str
    outputs: dict[str, list[str]] = field(default_factory=dict)
    comparison: str | None = None
    stage_ms: dict[str, float] = field(default_factory=dict)
    evaluations: int = 0
    oracle_evaluations: int = 0
    runge_warnings: list[int] = field(default_factory=list)
    reports: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@contextmanager
def _stage(name: str, timings: dict[str, float]) -> Iterator[None]:
    start = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except (LdsMarginalsError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc
    finally:
        timings[name] = (time.perf_counter() - start) * 1000.0
        logger.debug(f"stage {name}: {timings[name]:.1f} ms")


def build_point_set(cfg: ExperimentConfig, dim: int) -> PointSet:
    """Unit-cube Korobov lattice for the config, thinned if requested."""
    alpha = cfg.alpha if cfg.alpha is not None else search_generating_constant(cfg.points, dim)
    ps = generate_korobov(cfg.points, dim, alpha, extensible=cfg.extensible)
    if cfg.thin:
        ps = thin_lattice(ps, cfg.thin)
    return ps


def resolve_region(cfg: ExperimentConfig, ms: ModeSummary) -> IntegrationRegion:
    if cfg.region is not None:
        return region_from_bounds(cfg.region)
    return build_region(ms, cfg.region_sd)


def apply_method(target: TargetDensity, method: MethodSpec, cfg: ExperimentConfig,
                 ms: ModeSummary, region: IntegrationRegion,
                 ps: PointSet) -> tuple[list[MarginalApprox], int]:
    """Run one method; returns its marginals and the number of target evaluations."""
    if method.name == "grid":
        return marginalize_grid(target, region, cfg.grid_n), cfg.grid_n**target.dim
    if method.name == "half-gaussian":
        return (half_gaussian_baseline(target, ms, region),
                _HALF_GAUSSIAN_EVALUATIONS * target.dim)
    if method.name == "oracle":
        return dense_grid_oracle(target, region, cfg.dense_n), cfg.dense_n**target.dim

    cloud = evaluate_cloud(target, scale_to_region(ps, region))
    return marginals_from_cloud(target, method, cloud, cfg.partitions), cloud.size


def marginals_from_cloud(target: TargetDensity, method: MethodSpec,
                         cloud: EvaluationCloud, partitions: int) -> list[MarginalApprox]:
    """Lattice methods (stm, qa, cx) on an already evaluated cloud."""
    if method.name == "stm":
        return marginals_from_stm_cloud(target, cloud, method.degree or DEFAULT_STM_DEGREE)
    if method.name == "qa":
        return marginals_from_partitions(target, cloud, partitions)
    if method.name == "cx":
        return marginals_from_partitions(target, cloud, partitions, method.degree)
    raise ConfigError(f"{method.tag} is not a lattice method")


def _compare_all(oracle: list[MarginalApprox], marginals: list[MarginalApprox],
                 m: int) -> list[DistanceReport]:
    return [compare_marginals(ref, approx, m) for ref, approx in zip(oracle, marginals)]


def run_experiment(cfg: ExperimentConfig) -> RunManifest:
    """Run the configured method end to end and write its outputs."""
    timings: dict[str, float] = {}
    with _stage("target", timings):
        cfg.validate()
        target = parse_target_spec(cfg.target)
        method = cfg.method_spec
    manifest = RunManifest(config=asdict(cfg), version=__version__, target=target.label,
                           method=method.tag, stage_ms=timings)
    logger.info(f"running {method.tag} on {target.label}")

    with _stage("mode", timings):
        ms = find_mode_hessian(target)
    with _stage("points", timings):
        region = resolve_region(cfg, ms)
        ps = build_point_set(cfg, target.dim)
    with _stage("marginalize", timings):
        marginals, manifest.evaluations = apply_method(target, method, cfg, ms, region, ps)
    manifest.runge_warnings = [m.axis + 1 for m in marginals if m.runge_warning]
    for axis in manifest.runge_warnings:
        logger.warning(f"axis {axis}: {method.tag} fit was clamped (Runge warning)")

    oracle = None
    if cfg.oracle != "none":
        with _stage("oracle", timings):
            oracle = oracle_marginals(target, region, cfg.oracle, cfg.dense_n)
            if target.analytic_marginals is None or cfg.oracle == "dense":
                manifest.oracle_evaluations = cfg.dense_n**target.dim

    reports: list[DistanceReport] = []
    if oracle is not None:
        with _stage("compare", timings):
            reports = _compare_all(oracle, marginals, cfg.metric_grid)
        manifest.reports = [
            {"axis": r.axis + 1, "kl": r.kl, "hellinger": r.hellinger} for r in reports
        ]

    with _stage("write", timings):
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        for m in marginals:
            manifest.outputs[f"axis{m.axis + 1}"] = list(write_marginal(m, str(out)))
        if reports:
            manifest.comparison = write_comparison_csv(reports, str(out / "comparison.csv"))
        dump_config(cfg, str(out / "config.yaml"))
        write_manifest(manifest.to_dict(), str(out / "manifest.json"))
    return manifest


def matched_grid_n(big_n: int, dim: int) -> int:
    """Largest n with n**dim <= big_n."""
    n = int(round(big_n ** (1.0 / dim)))
    while n > 1 and n**dim > big_n:
        n -= 1
    while (n + 1) ** dim <= big_n:
        n += 1
    return n


def _lattice_for(base: PointSet, big_n: int, dim: int, extensible: bool) -> PointSet:
    ratio = base.big_n // big_n
    if base.big_n % big_n == 0 and ratio & (ratio - 1) == 0:
        return base if ratio == 1 else thin_lattice(base, int(math.log2(ratio)))
    logger.debug(f"N={big_n} is not a power-of-two divisor of {base.big_n}, generating it")
    alpha = base.alpha % big_n or search_generating_constant(big_n, dim)
    return generate_korobov(big_n, dim, alpha, extensible=extensible)


def _study_rows(label: str, big_n: int, reports: list[DistanceReport],
                walltime_ms: float) -> list[dict[str, Any]]:
    return [
        {"method": label, "N": big_n, "axis": r.axis + 1, "kl": r.kl,
         "hellinger": r.hellinger, "walltime_ms": walltime_ms}
        for r in reports
    ]


def convergence_study(cfg: ExperimentConfig) -> list[dict[str, Any]]:
    """Per-axis distances to the oracle for every N and method; writes study.csv."""
    timings: dict[str, float] = {}
    with _stage("target", timings):
        cfg.validate()
        if cfg.oracle == "none":
            raise ConfigError("a convergence study needs an oracle")
        target = parse_target_spec(cfg.target)
        methods = [parse_method(m) for m in cfg.study_methods]
    with _stage("mode", timings):
        ms = find_mode_hessian(target)
    with _stage("points", timings):
        region = resolve_region(cfg, ms)
        sizes = sorted(set(cfg.study_points))
        largest = sizes[-1]
        if cfg.alpha is not None and cfg.alpha < largest:
            alpha = cfg.alpha
        else:
            alpha = search_generating_constant(largest, target.dim)
        base = generate_korobov(largest, target.dim, alpha, extensible=True)
    with _stage("oracle", timings):
        oracle = oracle_marginals(target, region, cfg.oracle, cfg.dense_n)

    rows: list[dict[str, Any]] = []
    grids_done: set[int] = set()
    with _stage("marginalize", timings):
        for big_n in sizes:
            ps = scale_to_region(_lattice_for(base, big_n, target.dim, cfg.extensible), region)
            start = time.perf_counter()
            cloud = evaluate_cloud(target, ps)
            eval_ms = (time.perf_counter() - start) * 1000.0
            for method in methods:
                start = time.perf_counter()
                marginals = marginals_from_cloud(target, method, cloud, cfg.partitions)
                fit_ms = (time.perf_counter() - start) * 1000.0
                rows += _study_rows(method.tag, big_n,
                                    _compare_all(oracle, marginals, cfg.metric_grid),
                                    eval_ms + fit_ms)

            n = matched_grid_n(big_n, target.dim)
            if n >= MIN_GRID_POINTS and n not in grids_done:
                grids_done.add(n)
                start = time.perf_counter()
                marginals = marginalize_grid(target, region, n)
                walltime = (time.perf_counter() - start) * 1000.0
                rows += _study_rows("grid", n**target.dim,
                                    _compare_all(oracle, marginals, cfg.metric_grid), walltime)

    with _stage("write", timings):
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        write_study_csv(rows, str(out / "study.csv"))
    logger.info(f"study on {target.label}: {len(rows)} rows")
    return rows

