"""Tests for the natural-world GJR tree."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from scipy import stats

from src.tree.gjr_tree import (
    NaturalParams,
    build_tree,
    cumulative_return_moments,
    drift_sequence,
    exact_return_moments,
    path_prices,
    return_moments,
    simulate_paths,
    tree_moments,
)
from src.utils.errors import InvalidArgumentError

SPY = dict(mu=0.119, sigma=0.151, beta=-0.978, s0=419.67)


def spy_params(n: int = 252) -> NaturalParams:
    return NaturalParams(n=n, **SPY)


class TestNaturalParams:
    """Parameter validation."""

    def test_alpha(self) -> None:
        p = spy_params()
        assert p.alpha_dt == pytest.approx(0.5 * (1 - 0.978 / math.sqrt(252)))
        assert p.T == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(sigma=0.0),
            dict(s0=-1.0),
            dict(n=0),
            dict(beta=math.sqrt(252)),
            dict(beta=-math.sqrt(252)),
        ],
    )
    def test_rejects_invalid(self, kwargs: dict) -> None:
        base = dict(mu=0.05, sigma=0.2, beta=0.0)
        with pytest.raises(InvalidArgumentError):
            NaturalParams(**{**base, **kwargs})


class TestBuildTree:
    """Node prices and recombination."""

    def test_one_step_nodes(self) -> None:
        tree = build_tree(NaturalParams(mu=0.0, sigma=0.2, beta=0.0, dt=1.0, n=1, s0=100.0))
        down, up = tree.prices_at(1)
        assert up == pytest.approx(122.140, abs=1e-3)
        assert down == pytest.approx(81.873, abs=1e-3)
        assert tree.price(0, 0) == 100.0

    def test_drift_sequence(self) -> None:
        v = drift_sequence(0.1, 0.2, 0.0, 5)
        assert v.tolist() == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
        v = drift_sequence(0.1, 0.2, -1.0, 3)
        assert v[0] == 0.0
        assert v[2] == pytest.approx(0.2 - 0.2 * (math.sqrt(4 / math.pi) - 1))

    def test_node_formula(self) -> None:
        p = spy_params(20)
        tree = build_tree(p)
        v = drift_sequence(p.mu, p.sigma, p.beta, p.n)
        for k, m in [(5, -3), (10, 0), (20, 20)]:
            expected = p.s0 * math.exp(v[k] * p.dt + m * p.sigma * math.sqrt(p.dt))
            assert tree.price(k, m) == pytest.approx(expected, rel=1e-14)

    def test_unreachable_node(self) -> None:
        tree = build_tree(spy_params(4))
        with pytest.raises(InvalidArgumentError):
            tree.price(3, 2)

    def test_recombination(self) -> None:
        """Every path of 12 steps lands on the node of its terminal level."""
        p = spy_params(12)
        tree = build_tree(p)
        steps = np.array(list(itertools.product([-1, 1], repeat=12)))
        levels = np.concatenate([np.zeros((steps.shape[0], 1), dtype=int), np.cumsum(steps, axis=1)], axis=1)
        prices = path_prices(tree, levels)
        for k in (3, 7, 12):
            expected = tree.prices_at(k)[(levels[:, k] + k) // 2]
            assert np.array_equal(prices[:, k], expected)

    def test_node_count_and_table(self) -> None:
        tree = build_tree(spy_params(6))
        assert tree.node_count == 28
        assert np.isfinite(tree.node_prices).sum() == 28
        frame = tree.to_frame()
        assert list(frame.columns) == ["k", "level", "price"]
        assert len(frame) == 28

    def test_zero_beta_is_jarrow_rudd(self) -> None:
        p = NaturalParams(mu=0.07, sigma=0.3, beta=0.0, n=10)
        tree = build_tree(p)
        assert tree.drift_seq.tolist() == pytest.approx((0.07 * np.arange(11)).tolist())


class TestSimulatePaths:
    """Monte-Carlo behaviour of the tree."""

    def test_symmetric_terminal_mean(self) -> None:
        p = NaturalParams(mu=0.08, sigma=0.2, beta=0.0, n=252, s0=50.0)
        ensemble = simulate_paths(build_tree(p), 20_000, seed=1)
        terminal = ensemble.cum_log_returns[:, -1]
        se = terminal.std(ddof=1) / math.sqrt(terminal.size)
        assert abs(terminal.mean() - 0.08) <= 4 * se

    def test_skewed_mean_tracks_exact_moments(self) -> None:
        p = spy_params()
        returns = simulate_paths(build_tree(p), 20_000, seed=2).cum_log_returns
        for k in (63, 126, 252):
            mean, variance = exact_return_moments(p, k)
            se = math.sqrt(variance / returns.shape[0])
            assert abs(returns[:, k].mean() - mean) <= 4 * se

    def test_sign_of_skewness(self) -> None:
        p = NaturalParams(mu=0.0, sigma=0.2, beta=-10.0, n=50)
        terminal = simulate_paths(build_tree(p), 50_000, seed=3).cum_log_returns[:, -1]
        assert stats.skew(terminal) > 0

    def test_deterministic_and_exportable(self) -> None:
        tree = build_tree(spy_params(30))
        a, b = simulate_paths(tree, 5, seed=4), simulate_paths(tree, 5, seed=4)
        assert np.array_equal(a.prices, b.prices)
        frame = a.to_frame()
        assert list(frame.columns) == ["path_id", "k", "price"]
        assert len(frame) == 5 * 31
        assert np.all(a.prices[:, 0] == 419.67)


class TestReturnMoments:
    """Closed-form and exact cumulative return moments."""

    def test_zero_beta(self) -> None:
        p = NaturalParams(mu=0.1, sigma=0.25, beta=0.0, n=252)
        mean, variance = return_moments(p, 252)
        assert mean == pytest.approx(0.1)
        assert variance == pytest.approx(0.0625)

    def test_spy_closed_form(self) -> None:
        mean, _ = return_moments(spy_params(), 252)
        assert mean == pytest.approx(0.119 + 0.151 * (-0.978) * math.sqrt(2 * 252 / math.pi) / 252)

    def test_zero_sigma(self) -> None:
        assert cumulative_return_moments(0.05, 0.0, -0.5, 1 / 252, 10) == pytest.approx((0.05 * 10 / 252, 0.0))

    def test_exact_agrees_at_first_step(self) -> None:
        p = spy_params()
        assert exact_return_moments(p, 1)[0] == pytest.approx(return_moments(p, 1)[0], rel=1e-12)

    def test_zero_beta_exact_equals_closed(self) -> None:
        p = NaturalParams(mu=0.1, sigma=0.25, beta=0.0, n=100)
        assert exact_return_moments(p, 100) == pytest.approx(return_moments(p, 100))

    def test_out_of_range(self) -> None:
        with pytest.raises(InvalidArgumentError):
            return_moments(spy_params(10), 11)
        with pytest.raises(InvalidArgumentError):
            exact_return_moments(spy_params(10), 0)

    def test_step_moments(self) -> None:
        skew, kurt = tree_moments(spy_params())
        assert skew == pytest.approx(0.978 * math.sqrt(2 / (252 * math.pi)))
        assert kurt == pytest.approx(8 * 0.978**2 / (252 * math.pi))
