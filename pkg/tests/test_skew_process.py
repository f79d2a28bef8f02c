"""Tests for skew Brownian motion, the skew walk and the CSYIP builder."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, stats

from src.process.kernels import available_h, get_h, register_h, student_t_density
from src.process.skew_process import (
    SkewParam,
    SkewPath,
    azzalini_sample,
    csyip_build,
    expected_walk_level,
    iter_walk_blocks,
    origin_visit_probabilities,
    sbm_cdf,
    sbm_mgf,
    sbm_moments,
    sbm_pdf,
    sbm_raw_moment,
    sbm_sample,
    skew_walk_path,
    skew_walk_step,
    walk_ensemble,
)
from src.utils.errors import ConfigurationError, InvalidArgumentError
from src.utils.rng import make_rng

HALF_NORMAL_MEAN = math.sqrt(2.0 / math.pi)


def within_se(sample: np.ndarray, expected: float, k: float = 4.0) -> bool:
    se = sample.std(ddof=1) / math.sqrt(sample.size)
    return abs(sample.mean() - expected) <= k * se


class TestSbmMoments:
    """Closed-form SBM moments."""

    def test_symmetric_case(self) -> None:
        m = sbm_moments(0.5, 7.0)
        assert m.mean == 0.0
        assert m.variance == pytest.approx(7.0)
        assert m.skewness == 0.0
        assert m.excess_kurtosis == 0.0

    def test_half_normal(self) -> None:
        m = sbm_moments(1.0, 1.0)
        assert m.mean == pytest.approx(0.79788, abs=1e-5)
        assert m.variance == pytest.approx(0.36338, abs=1e-5)

    def test_sign_symmetry(self) -> None:
        up, down = sbm_moments(1.0, 1.0), sbm_moments(0.0, 1.0)
        assert down.mean == pytest.approx(-up.mean)
        assert down.variance == pytest.approx(up.variance)
        assert down.skewness == pytest.approx(-up.skewness)
        assert down.excess_kurtosis == pytest.approx(up.excess_kurtosis)

    def test_shape_independent_of_time(self) -> None:
        a, b = sbm_moments(0.8, 0.5), sbm_moments(0.8, 9.0)
        assert a.skewness == pytest.approx(b.skewness)
        assert a.excess_kurtosis == pytest.approx(b.excess_kurtosis)

    def test_rejects_non_positive_time(self) -> None:
        with pytest.raises(InvalidArgumentError):
            sbm_moments(0.5, 0.0)

    def test_raw_moments_match_closed_forms(self) -> None:
        assert sbm_raw_moment(0.7, 2.0, 1) == pytest.approx(sbm_moments(0.7, 2.0).mean)
        assert sbm_raw_moment(0.7, 2.0, 2) == pytest.approx(2.0)
        assert sbm_raw_moment(0.1, 2.0, 4) == pytest.approx(3.0 * 4.0)

    def test_mgf_at_zero_and_slope(self) -> None:
        assert sbm_mgf(0.3, 1.5, 0.0) == pytest.approx(1.0)
        h = 1e-5
        slope = (sbm_mgf(0.3, 1.5, h) - sbm_mgf(0.3, 1.5, -h)) / (2 * h)
        assert slope == pytest.approx(sbm_moments(0.3, 1.5).mean, rel=1e-6)


class TestSbmDistribution:
    """Density and distribution function."""

    def test_cdf_at_zero(self) -> None:
        assert sbm_cdf(0.5, 1.0, 0.0) == pytest.approx(0.5)
        for t in (0.1, 1.0, 5.0):
            assert sbm_cdf(0.7, t, 0.0) == pytest.approx(0.3)

    def test_cdf_matches_quadrature(self) -> None:
        f = lambda x: sbm_pdf(0.7, 1.0, x)  # noqa: E731
        left, _ = integrate.quad(f, -np.inf, 0.0, epsabs=1e-13)
        right, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-13)
        assert sbm_cdf(0.7, 1.0, 1.0) == pytest.approx(left + right, abs=1e-10)

    def test_density_integrates_to_one(self) -> None:
        f = lambda x: sbm_pdf(0.25, 2.0, x)  # noqa: E731
        total = integrate.quad(f, -np.inf, 0.0)[0] + integrate.quad(f, 0.0, np.inf)[0]
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_cdf_monotone_with_limits(self) -> None:
        x = np.linspace(-8, 8, 401)
        values = sbm_cdf(0.2, 1.0, x)
        assert np.all(np.diff(values) >= 0)
        assert values[0] == pytest.approx(0.0, abs=1e-12)
        assert values[-1] == pytest.approx(1.0, abs=1e-12)


class TestSbmSampling:
    """Reflection and Azzalini samplers."""

    def test_half_normal_mean(self) -> None:
        sample = sbm_sample(1.0, 1.0, 200_000, seed=1)
        assert within_se(sample, HALF_NORMAL_MEAN)

    def test_symmetric_mean(self) -> None:
        assert within_se(sbm_sample(0.5, 1.0, 200_000, seed=2), 0.0)

    def test_variance_formula(self) -> None:
        sample = sbm_sample(0.9, 4.0, 200_000, seed=3)
        expected = (1 - 2 * 0.8**2 / math.pi) * 4.0
        assert sample.var(ddof=1) == pytest.approx(expected, rel=0.02)

    def test_even_moments_ignore_alpha(self) -> None:
        a = sbm_sample(0.1, 1.0, 200_000, seed=4)
        b = sbm_sample(0.9, 1.0, 200_000, seed=5)
        assert within_se(a**2, 1.0) and within_se(b**2, 1.0)

    def test_sign_flip_symmetry(self) -> None:
        a = sbm_sample(0.8, 1.0, 100_000, seed=6)
        b = -sbm_sample(0.2, 1.0, 100_000, seed=7)
        assert stats.ks_2samp(a, b).pvalue > 0.001

    def test_deterministic(self) -> None:
        assert np.array_equal(sbm_sample(0.3, 1.0, 10, seed=9), sbm_sample(0.3, 1.0, 10, seed=9))

    def test_rejects_bad_arguments(self) -> None:
        with pytest.raises(InvalidArgumentError):
            sbm_sample(0.3, -1.0, 10, seed=0)
        with pytest.raises(InvalidArgumentError):
            sbm_sample(0.3, 1.0, 0, seed=0)
        with pytest.raises(InvalidArgumentError):
            azzalini_sample(1.0, 1.0, 10, seed=0)

    def test_azzalini_matches_reflection(self) -> None:
        a = azzalini_sample(0.4, 1.0, 100_000, seed=10)
        b = sbm_sample(0.7, 1.0, 100_000, seed=11)
        assert stats.ks_2samp(a, b).pvalue > 0.001

    def test_azzalini_mean(self) -> None:
        sample = azzalini_sample(-0.8, 2.0, 200_000, seed=12)
        assert within_se(sample, sbm_moments(0.1, 2.0).mean)

    def test_azzalini_zero_delta_is_gaussian(self) -> None:
        sample = azzalini_sample(0.0, 3.0, 200_000, seed=13)
        assert within_se(sample, 0.0)
        assert sample.var(ddof=1) == pytest.approx(3.0, rel=0.02)


class TestSkewWalk:
    """Walk kernel, paths and ensembles."""

    def test_step_thresholds(self) -> None:
        assert skew_walk_step(0.75, 0, 0.74) == 1
        assert skew_walk_step(0.75, 0, 0.76) == -1
        assert skew_walk_step(0.75, 3, 0.49) == 4
        assert skew_walk_step(0.75, 3, 0.51) == 2

    def test_step_frequencies(self) -> None:
        u = make_rng(21).random(100_000)
        ups_origin = np.array([skew_walk_step(0.75, 0, x) for x in u]) == 1
        ups_away = np.array([skew_walk_step(0.75, 3, x) for x in u]) == 4
        assert within_se(ups_origin.astype(float), 0.75)
        assert within_se(ups_away.astype(float), 0.5)

    def test_boundary_alpha_rejected(self) -> None:
        assert not SkewParam(1.0).walk_ready
        with pytest.raises(InvalidArgumentError):
            skew_walk_step(0.0, 0, 0.5)
        with pytest.raises(InvalidArgumentError):
            skew_walk_path(1.0, 10, seed=0)

    def test_path_invariants(self) -> None:
        path = skew_walk_path(0.469, 252, seed=3)
        assert path.n == 252
        assert path.steps[0] == 0
        assert np.all(np.abs(path.increments) == 1)

    def test_path_rejects_bad_levels(self) -> None:
        with pytest.raises(InvalidArgumentError):
            SkewPath(steps=np.array([1, 2]))
        with pytest.raises(InvalidArgumentError):
            SkewPath(steps=np.array([0, 2]))
        with pytest.raises(InvalidArgumentError):
            skew_walk_path(0.5, 0, seed=0)

    def test_path_deterministic(self) -> None:
        a = skew_walk_path(0.6, 100, seed=42)
        b = skew_walk_path(0.6, 100, seed=42)
        assert np.array_equal(a.steps, b.steps)

    def test_nested_ensembles(self) -> None:
        """A larger ensemble starts with every path of a smaller one."""
        small = walk_ensemble(0.45, 30, 50, seed=5, block_size=32)
        large = walk_ensemble(0.45, 30, 100, seed=5, block_size=32)
        assert np.array_equal(large[:50], small)

    def test_terminal_only_matches_full(self) -> None:
        full = walk_ensemble(0.45, 30, 70, seed=8, block_size=16)
        terminal = walk_ensemble(0.45, 30, 70, seed=8, block_size=16, terminal_only=True)
        assert np.array_equal(full[:, -1], terminal)

    def test_block_offsets(self) -> None:
        offsets = [offset for offset, _ in iter_walk_blocks(0.5, 5, 10, seed=0, block_size=4)]
        assert offsets == [0, 4, 8]

    def test_symmetric_terminal_mean(self) -> None:
        terminal = walk_ensemble(0.5, 10, 100_000, seed=14, terminal_only=True)
        assert within_se(terminal.astype(float), 0.0)

    def test_positive_predominance(self) -> None:
        terminal = walk_ensemble(0.9, 100, 20_000, seed=15, terminal_only=True)
        assert np.mean(terminal > 0) > 0.5


class TestWalkLevels:
    """Exact level moments of the skew walk."""

    def test_origin_visits(self) -> None:
        probs = origin_visit_probabilities(5)
        assert probs.tolist() == pytest.approx([1.0, 0.0, 0.5, 0.0, 0.375])

    def test_first_steps(self) -> None:
        assert expected_walk_level(0.469, 1) == pytest.approx(2 * 0.469 - 1)
        assert expected_walk_level(0.469, 2) == pytest.approx(2 * 0.469 - 1)
        assert expected_walk_level(0.7, 3) == pytest.approx(0.4 * 1.5)

    def test_growth_rate(self) -> None:
        k = 4000
        assert expected_walk_level(0.8, k) == pytest.approx(0.6 * math.sqrt(2 * k / math.pi), rel=0.01)

    def test_ensemble_level_moments(self) -> None:
        levels = walk_ensemble(0.3, 50, 100_000, seed=16).astype(float)
        assert within_se(levels[:, 50], expected_walk_level(0.3, 50))
        assert within_se(levels[:, 50] ** 2, 50.0)
        assert within_se(levels[:, 1], 2 * 0.3 - 1)


class TestCsyip:
    """Scaled walk and its h-weighted companion."""

    def test_constant_one_reproduces_walk(self) -> None:
        pair = csyip_build(skew_walk_path(0.6, 200, seed=1), "constant")
        assert np.array_equal(pair.c_path, pair.b_path)
        assert pair.b_path.size == 201 and pair.b_path[0] == 0.0

    def test_constant_zero(self) -> None:
        pair = csyip_build(skew_walk_path(0.6, 50, seed=1), "constant", value=0.0)
        assert np.all(pair.c_path == 0.0)

    def test_scaling(self) -> None:
        path = skew_walk_path(0.4, 400, seed=2)
        pair = csyip_build(path, "identity", T=4.0)
        assert pair.b_path[-1] == pytest.approx(math.sqrt(4.0 / 400) * path.steps[-1], abs=1e-12)

    def test_student_t_direct_summation(self) -> None:
        path = skew_walk_path(0.469, 1008, seed=3)
        pair = csyip_build(path, "student_t", kappa=6.24)
        b = path.steps / math.sqrt(1008)
        direct = 0.0
        for k in range(1, 1009):
            direct += student_t_density(b[k - 1], 6.24) * (b[k] - b[k - 1])
            if k % 252 == 0:
                assert pair.c_path[k] == pytest.approx(direct, abs=1e-12)
        assert pair.c_path[-1] == pytest.approx(direct, abs=1e-12)

    def test_unknown_h(self) -> None:
        with pytest.raises(ConfigurationError):
            csyip_build(skew_walk_path(0.5, 10, seed=0), "gaussian")

    def test_scaled_walk_converges_to_sbm(self) -> None:
        n, alpha = 1025, 0.7
        terminal = walk_ensemble(alpha, n, 20_000, seed=17, terminal_only=True) / math.sqrt(n)
        # spread each lattice atom over its cell
        jitter = make_rng(18).uniform(-1.0, 1.0, terminal.size) / math.sqrt(n)
        result = stats.kstest(terminal + jitter, lambda x: sbm_cdf(alpha, 1.0, x))
        assert result.statistic < 0.02


class TestHRegistry:
    """Registered h functions."""

    def test_registered_names(self) -> None:
        assert {"constant", "identity", "indicator", "student_t"} <= set(available_h())

    def test_indicator(self) -> None:
        h = get_h("indicator", a=-1.0, b=1.0)
        assert h(np.array([-2.0, 0.0, 1.0, 1.5])).tolist() == [0.0, 1.0, 1.0, 0.0]

    def test_student_t_peak(self) -> None:
        kappa = 6.24
        peak = math.gamma((kappa + 1) / 2) / (math.sqrt(kappa * math.pi) * math.gamma(kappa / 2))
        assert get_h("student_t", kappa=kappa)(np.array(0.0)) == pytest.approx(peak)

    def test_bad_parameters(self) -> None:
        with pytest.raises(ConfigurationError):
            get_h("indicator", a=0.0)

    def test_duplicate_registration(self) -> None:
        with pytest.raises(ConfigurationError):
            register_h("identity")(lambda: (lambda x: x))
