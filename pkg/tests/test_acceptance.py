"""End-to-end acceptance checks on the synthetic targets.

Structural identities (lattice exactness, thinning, projection) run fast.
The directional comparisons between methods run every pipeline on the
five-dimensional targets with N=512, alpha=19 and 15 partitions, and are
marked slow.
"""
import math

import numpy as np
import pytest
from scipy import stats

from ldsmarginals.baselines import analytic_oracle, half_gaussian_baseline
from ldsmarginals.marginalize import (marginal_from_density, marginalize_grid,
                                      marginalize_lds_cx, marginalize_lds_qa,
                                      marginalize_lds_stm)
from ldsmarginals.metrics import hellinger, kl_divergence, local_maxima
from ldsmarginals.pointset import (IntegrationRegion, generate_korobov, scale_to_region,
                                   thin_lattice)
from ldsmarginals.projection import EvaluationCloud, project_axis, project_axis_explicit
from ldsmarginals.targets import find_mode_hessian

from .conftest import BIMODAL_AXIS


def _kls(oracle, marginals):
    return [kl_divergence(ref, m) for ref, m in zip(oracle, marginals)]


def _assert_normalized(marginals):
    for m in marginals:
        assert m.integral() == pytest.approx(1.0, abs=1e-6)


@pytest.fixture(scope="module")
def skewed_runs(skewed5, skewed5_mode, skewed5_region, lattice512):
    """Every method on the skewed target, plus the oracle."""
    ps = scale_to_region(lattice512, skewed5_region)
    runs = {
        "oracle": analytic_oracle(skewed5, skewed5_region),
        "qa": marginalize_lds_qa(skewed5, ps, 15),
        "cx3": marginalize_lds_cx(skewed5, ps, 15, 3),
        "half-gaussian": half_gaussian_baseline(skewed5, skewed5_mode, skewed5_region),
        "grid": marginalize_grid(skewed5, skewed5_region, 4),
    }
    for marginals in runs.values():
        _assert_normalized(marginals)
    return runs


@pytest.fixture(scope="module")
def bimodal_runs(bimodal5, bimodal_region, lattice512):
    """QA, CX-3, CX-5 and the baseline on the bimodal target."""
    ps = scale_to_region(lattice512, bimodal_region)
    runs = {
        "oracle": analytic_oracle(bimodal5, bimodal_region),
        "qa": marginalize_lds_qa(bimodal5, ps, 15),
        "cx3": marginalize_lds_cx(bimodal5, ps, 15, 3),
        "cx5": marginalize_lds_cx(bimodal5, ps, 15, 5),
        "half-gaussian": half_gaussian_baseline(bimodal5, find_mode_hessian(bimodal5),
                                                bimodal_region),
    }
    for marginals in runs.values():
        _assert_normalized(marginals)
    return runs


class TestStructure:
    """Exact identities of the point sets and the projection."""

    def test_lattice_exactness(self):
        """Point i=2 of K(64, 2, 37) and the regular second coordinate."""
        ps = generate_korobov(64, 2, 37)
        assert tuple(ps.points[1]) == (1 / 64, 37 / 64)
        np.testing.assert_array_equal(np.sort(ps.points[:, 1]), np.arange(64) / 64)

    def test_extensibility(self):
        """thin(K*(64, 2, 19), 1) equals K*(32, 2, 19) in exact numerators."""
        thinned = thin_lattice(generate_korobov(64, 2, 19, extensible=True), 1)
        direct = generate_korobov(32, 2, 19, extensible=True)
        np.testing.assert_array_equal(thinned.numerators, direct.numerators)
        assert thinned.big_n == direct.big_n

    def test_projection_equivalence(self):
        """Column selection equals the explicit projection on random clouds."""
        rng = np.random.default_rng(3)
        for _ in range(50):
            n, s = int(rng.integers(1, 17)), int(rng.integers(1, 5))
            region = IntegrationRegion(np.zeros(s), np.ones(s))
            cloud = EvaluationCloud(rng.random((n, s)), rng.normal(size=n), region)
            for k in range(s):
                np.testing.assert_array_equal(project_axis_explicit(cloud, k).log_values,
                                              project_axis(cloud, k).log_values)


class TestMetricClosedForms:
    """Closed-form metric values."""

    def test_unit_shift(self):
        """KL = 0.5 and H = 0.34268 for N(0,1) against N(1,1)."""
        p = marginal_from_density(stats.norm(0.0, 1.0).pdf, (-8.0, 9.0), 0, "oracle")
        q = marginal_from_density(stats.norm(1.0, 1.0).pdf, (-8.0, 9.0), 0, "ref")
        assert kl_divergence(p, q) == pytest.approx(0.5, abs=1e-3)
        assert hellinger(p, q) == pytest.approx(0.34268, abs=1e-3)
        assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-6)
        assert hellinger(p, p) == pytest.approx(0.0, abs=1e-6)


@pytest.mark.slow
class TestGaussianRecovery:
    """QA and CX-3 on the independent five-dimensional Gaussian."""

    def test_qa_and_cx3(self, gaussian5, gaussian5_region, lattice512):
        """QA is within 1e-3 KL per axis and CX-3 within 2e-3."""
        ps = scale_to_region(lattice512, gaussian5_region)
        oracle = analytic_oracle(gaussian5, gaussian5_region)
        qa = marginalize_lds_qa(gaussian5, ps, 15)
        cx3 = marginalize_lds_cx(gaussian5, ps, 15, 3)
        _assert_normalized(qa + cx3)
        assert max(_kls(oracle, qa)) <= 1e-3
        assert max(_kls(oracle, cx3)) <= 2e-3


@pytest.mark.slow
class TestSkewedTarget:
    """Directional findings on the log-Gamma target."""

    def test_cx3_beats_qa_on_skewed_axes(self, skewed_runs):
        """Shapes 1 and 2 are fitted better by CX-3 than by QA."""
        qa = _kls(skewed_runs["oracle"], skewed_runs["qa"])
        cx3 = _kls(skewed_runs["oracle"], skewed_runs["cx3"])
        for k in (0, 1):
            assert cx3[k] < qa[k]

    def test_cx3_beats_half_gaussian(self, skewed_runs):
        """Mean KL of CX-3 is at least 20% below the half-Gaussian baseline."""
        cx3 = _kls(skewed_runs["oracle"], skewed_runs["cx3"])
        baseline = _kls(skewed_runs["oracle"], skewed_runs["half-gaussian"])
        assert np.mean(cx3) < 0.8 * np.mean(baseline)

    def test_cx3_beats_larger_grid(self, skewed_runs):
        """CX-3 on 512 lattice points beats the grid method on 4^5 points."""
        cx3 = _kls(skewed_runs["oracle"], skewed_runs["cx3"])
        grid = _kls(skewed_runs["oracle"], skewed_runs["grid"])
        assert np.mean(cx3) < np.mean(grid)


@pytest.mark.slow
class TestBimodalTarget:
    """Multimodality on the second axis of the bimodal target."""

    def test_cx5_finds_both_modes(self, bimodal5, bimodal_runs):
        """CX-5 has two maxima within 0.3 of the mixture modes."""
        peaks = local_maxima(bimodal_runs["cx5"][BIMODAL_AXIS])
        x = np.linspace(-4.0, 4.0, 8001)
        pdf = bimodal5.analytic_marginals[BIMODAL_AXIS](x)
        interior = np.flatnonzero((pdf[1:-1] > pdf[:-2]) & (pdf[1:-1] > pdf[2:])) + 1
        assert len(peaks) == 2
        np.testing.assert_allclose(peaks, x[interior], atol=0.3)

    def test_kl_ordering(self, bimodal_runs):
        """CX-5 is closest; on the symmetric region CX-3 reduces to QA.

        The partition means of an even mixture over [-4, 4] mirror exactly,
        so the residual of the quadratic has no cubic component and the two
        fits coincide.
        """
        oracle = bimodal_runs["oracle"][BIMODAL_AXIS]
        kl = {name: kl_divergence(oracle, bimodal_runs[name][BIMODAL_AXIS])
              for name in ("qa", "cx3", "cx5")}
        assert kl["cx5"] < kl["cx3"]
        assert kl["cx5"] < kl["qa"]
        cubic = bimodal_runs["cx3"][BIMODAL_AXIS].in_theta_z.rule["coefficients"]
        assert abs(cubic[1]) < 1e-10
        assert abs(cubic[3]) < 1e-10
        assert kl["cx3"] == pytest.approx(kl["qa"], rel=1e-8)

    def test_baseline_is_unimodal(self, bimodal_runs):
        """The half-Gaussian baseline cannot show the second mode."""
        assert len(local_maxima(bimodal_runs["half-gaussian"][BIMODAL_AXIS])) == 1


@pytest.mark.slow
class TestInvariants:
    """Scale invariance and Runge detection."""

    @pytest.mark.parametrize("decades", [300.0, -300.0])
    def test_scale_invariance(self, skewed5, skewed5_region, lattice512, decades):
        """Multiplying the target by 10^(+-300) leaves CX-3 unchanged."""
        ps = scale_to_region(lattice512, skewed5_region)
        plain = marginalize_lds_cx(skewed5, ps, 15, 3)
        scaled = marginalize_lds_cx(skewed5.shifted(decades * math.log(10.0)), ps, 15, 3)
        for a, b in zip(plain, scaled):
            z = a.in_theta_z.nodes()
            np.testing.assert_allclose(b.in_theta_z.density(z), a.in_theta_z.density(z),
                                       rtol=1e-9, atol=1e-12)

    def test_runge_detection(self, skewed5, skewed5_region, lattice512, skewed_runs):
        """Degree-14 StM is flagged on some axis; CX never is."""
        stm = marginalize_lds_stm(skewed5, scale_to_region(lattice512, skewed5_region), 14)
        _assert_normalized(stm)
        assert any(m.runge_warning for m in stm)
        assert not any(m.runge_warning for m in skewed_runs["cx3"])
