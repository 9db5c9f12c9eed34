"""Tests for end-to-end runs and the convergence study."""
import csv
import json

import numpy as np
import pytest

from ldsmarginals.config import ExperimentConfig, load_config
from ldsmarginals.errors import ConfigError, StageError
from ldsmarginals.experiment import (_lattice_for, build_point_set, convergence_study,
                                     matched_grid_n, run_experiment)
from ldsmarginals.pointset import generate_korobov


def _small(tmp_path, **overrides):
    values = dict(target="gaussian:dim=2", method="qa", points=128, alpha=19,
                  partitions=9, output=str(tmp_path / "out"))
    values.update(overrides)
    return ExperimentConfig(**values)


class TestRunExperiment:
    """Tests for run_experiment."""

    def test_writes_outputs(self, tmp_path):
        """A QA run writes marginals, comparison, config and manifest."""
        manifest = run_experiment(_small(tmp_path))
        out = tmp_path / "out"
        for name in ("axis1_qa.json", "axis1_qa.csv", "axis2_qa.json", "axis2_qa.csv",
                     "comparison.csv", "config.yaml", "manifest.json"):
            assert (out / name).exists(), name
        assert manifest.method == "qa"
        assert manifest.evaluations == 128
        assert manifest.oracle_evaluations == 0
        assert set(manifest.outputs) == {"axis1", "axis2"}
        assert set(manifest.stage_ms) == {"target", "mode", "points", "marginalize",
                                          "oracle", "compare", "write"}

    def test_gaussian_is_close(self, tmp_path):
        """QA on a Gaussian is close to the analytic marginals."""
        manifest = run_experiment(_small(tmp_path))
        assert len(manifest.reports) == 2
        for report in manifest.reports:
            assert report["kl"] < 0.05
            assert report["hellinger"] < 0.2

    def test_manifest_and_config_files(self, tmp_path):
        """The written manifest and config describe the run."""
        cfg = _small(tmp_path)
        run_experiment(cfg)
        with open(tmp_path / "out" / "manifest.json", encoding="utf-8") as f:
            data = json.load(f)
        assert data["evaluations"] == 128
        assert data["target"] == "gaussian:dim=2"
        assert data["config"]["partitions"] == 9
        assert load_config(str(tmp_path / "out" / "config.yaml")) == cfg

    def test_comparison_rows(self, tmp_path):
        """comparison.csv holds one row per axis."""
        run_experiment(_small(tmp_path))
        with open(tmp_path / "out" / "comparison.csv", newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["axis", "kl", "hellinger"]
        assert [r[0] for r in rows[1:]] == ["1", "2"]

    def test_thinned_run(self, tmp_path):
        """One halving halves the evaluation count."""
        assert run_experiment(_small(tmp_path, thin=1)).evaluations == 64

    @pytest.mark.parametrize("method,expected", [
        ("grid", 36),
        ("half-gaussian", 12),
        ("cx3", 128),
        ("stm4", 128),
    ])
    def test_evaluation_counts(self, tmp_path, method, expected):
        """Each method reports the target evaluations it used."""
        manifest = run_experiment(_small(tmp_path, method=method, grid_n=6))
        assert manifest.evaluations == expected

    def test_dense_oracle_method(self, tmp_path):
        """The dense-grid oracle agrees with the analytic one (n=41)."""
        manifest = run_experiment(_small(tmp_path, method="oracle", dense_n=41))
        assert manifest.evaluations == 41**2
        for report in manifest.reports:
            assert report["kl"] <= 1e-4

    def test_no_oracle(self, tmp_path):
        """Without an oracle nothing is compared."""
        manifest = run_experiment(_small(tmp_path, oracle="none"))
        assert manifest.reports == []
        assert manifest.comparison is None
        assert not (tmp_path / "out" / "comparison.csv").exists()

    def test_dense_oracle_counted(self, tmp_path):
        """A dense-grid oracle reports its evaluations."""
        manifest = run_experiment(_small(tmp_path, oracle="dense", dense_n=5))
        assert manifest.oracle_evaluations == 25

    def test_invalid_config_names_stage(self, tmp_path):
        """Validation failures surface as a StageError of the target stage."""
        with pytest.raises(StageError) as info:
            run_experiment(_small(tmp_path, partitions=2))
        assert info.value.stage == "target"
        assert isinstance(info.value.cause, ConfigError)
        assert "stage 'target' failed" in str(info.value)

    def test_search_alpha(self, tmp_path):
        """alpha=None searches the generating constant."""
        ps = build_point_set(_small(tmp_path, points=64, alpha=None), 2)
        assert ps.alpha is not None
        assert ps.big_n == 64


class TestConvergenceStudy:
    """Tests for convergence_study and its helpers."""

    @pytest.mark.parametrize("big_n,dim,expected", [
        (64, 2, 8), (100, 2, 10), (1024, 5, 4), (1023, 5, 3), (512, 3, 8), (7, 3, 1),
    ])
    def test_matched_grid_n(self, big_n, dim, expected):
        """Largest n with n^s <= N."""
        assert matched_grid_n(big_n, dim) == expected

    def test_smaller_lattices_are_thinned(self):
        """Power-of-two divisors reuse the largest lattice's points."""
        base = generate_korobov(128, 2, 19, extensible=True)
        small = _lattice_for(base, 32, 2, True)
        np.testing.assert_array_equal(small.points, base.points[::4])
        np.testing.assert_array_equal(small.points, generate_korobov(32, 2, 19).points)
        assert _lattice_for(base, 128, 2, True) is base

    def test_other_sizes_are_generated(self):
        """Sizes that do not divide by a power of two get their own lattice."""
        base = generate_korobov(128, 2, 19, extensible=True)
        other = _lattice_for(base, 96, 2, True)
        assert other.big_n == 96
        assert other.alpha == 19

    def test_rows(self, tmp_path):
        """Every method and matched grid gets one row per axis and size."""
        cfg = _small(tmp_path, study_points=[128, 64], study_methods=["qa", "cx3"])
        rows = convergence_study(cfg)
        assert len(rows) == 12
        assert {r["method"] for r in rows} == {"qa", "cx3", "grid"}
        assert sorted({r["N"] for r in rows if r["method"] == "grid"}) == [64, 121]
        assert sorted({r["N"] for r in rows if r["method"] == "qa"}) == [64, 128]
        with open(tmp_path / "out" / "study.csv", newline="", encoding="utf-8") as f:
            table = list(csv.reader(f))
        assert table[0] == ["method", "N", "axis", "kl", "hellinger", "walltime_ms"]
        assert len(table) == 13

    def test_needs_oracle(self, tmp_path):
        """A study without an oracle is rejected."""
        with pytest.raises(StageError) as info:
            convergence_study(_small(tmp_path, oracle="none"))
        assert isinstance(info.value.cause, ConfigError)

    def test_grid_is_not_a_lattice_method(self, tmp_path):
        """Only lattice methods can be studied on a lattice."""
        with pytest.raises(StageError) as info:
            convergence_study(_small(tmp_path, study_points=[64], study_methods=["grid"]))
        assert info.value.stage == "marginalize"
