"""Tests for implied-parameter surfaces and the transaction-cost fit."""

from __future__ import annotations

import logging
import math
from dataclasses import replace
from datetime import date

import numpy as np
import pytest

from src.calibration import implied
from src.calibration.implied import (
    CalibrationContext,
    ImpliedPoint,
    ImpliedSurface,
    OptionQuote,
    build_surface,
    default_bounds,
    deviation_surface,
    fit_htc,
    implied_point,
    model_price,
)
from src.ingestion.synthetic import manufactured_chain
from src.pricing.black_scholes import bs_implied_vol
from src.utils.errors import InfeasibleParameterError, InvalidArgumentError

CTX = CalibrationContext(mu=0.1, sigma=0.2, beta=-1.0)
QUOTE_DATE = date(2021, 6, 1)


def quote(strike: float = 100.0, expiry: date = date(2021, 6, 15), bid: float = 1.0, ask: float = 1.2, kind: str = "call") -> OptionQuote:
    return OptionQuote(QUOTE_DATE, expiry, strike, kind, bid, ask, 100.0, 0.02)


class TestOptionQuote:
    """Contract validation."""

    def test_properties(self) -> None:
        q = quote(strike=105.0, expiry=date(2021, 6, 8))
        assert q.mid == pytest.approx(1.1)
        assert q.trading_days == 5
        assert q.moneyness == pytest.approx(1.05)

    @pytest.mark.parametrize(
        "kwargs",
        [dict(kind="straddle"), dict(bid=2.0, ask=1.0), dict(expiry=QUOTE_DATE), dict(strike=0.0)],
    )
    def test_rejects_invalid(self, kwargs: dict) -> None:
        with pytest.raises(InvalidArgumentError):
            quote(**kwargs)


class TestImpliedPoint:
    """Scalar inversion of one contract."""

    def test_sigma_round_trip(self) -> None:
        (q,) = manufactured_chain(CTX, 100.0, 0.02, [105.0], [10], target="sigma", value=0.25)
        point = implied_point(q, "sigma", CTX)
        assert point.flag == "ok"
        assert point.value == pytest.approx(0.25, abs=1e-6)
        assert point.residual < 1e-12

    def test_put_sigma_round_trip(self) -> None:
        (q,) = manufactured_chain(CTX, 100.0, 0.02, [95.0], [21], target="sigma", value=0.18, kind="put")
        assert implied_point(q, "sigma", CTX).value == pytest.approx(0.18, abs=1e-6)

    def test_bs_sigma_matches_black_scholes(self) -> None:
        q = quote(strike=102.0, bid=1.5, ask=1.7)
        point = implied_point(q, "bs_sigma", CTX)
        T = q.trading_days / 252
        assert point.value == pytest.approx(bs_implied_vol(1.6, 100.0, 102.0, T, 0.02), abs=1e-6)

    def test_pd_sigma_round_trip(self) -> None:
        ctx = CalibrationContext(mu=0.1, sigma=0.2, beta=0.0, gamma=0.2)
        (q,) = manufactured_chain(ctx, 100.0, 0.02, [100.0], [6], target="pd_sigma", value=0.3)
        assert implied_point(q, "pd_sigma", ctx).value == pytest.approx(0.3, abs=1e-6)

    def test_unreachable_price_is_hole(self) -> None:
        q = quote(strike=1000.0, expiry=date(2021, 6, 3), bid=0.01, ask=0.02)
        point = implied_point(q, "sigma", CTX)
        assert point.flag == "non_identifiable"
        assert math.isnan(point.value) and math.isnan(point.residual)

    def test_boundary_flag(self) -> None:
        (q,) = manufactured_chain(CTX, 100.0, 0.02, [100.0], [10], target="sigma", value=0.5)
        point = implied_point(q, "sigma", CTX, bounds=(0.1, 0.3))
        assert point.flag == "boundary"
        assert point.value == pytest.approx(0.3)
        assert point.residual > 0

    def test_unknown_target(self) -> None:
        with pytest.raises(InvalidArgumentError):
            default_bounds("rho")
        with pytest.raises(InvalidArgumentError):
            model_price(quote(), CTX, "rho", 1.0)

    def test_beta_bounds_inside_unit_alpha(self) -> None:
        lo, hi = default_bounds("beta", 1 / 252)
        assert -math.sqrt(252) < lo < 0 < hi < math.sqrt(252)

    def test_beta_round_trip_keeps_root_near_context(self) -> None:
        # the call price is not monotone in beta here; a second root sits near beta = 3.77
        (q,) = manufactured_chain(CTX, 100.0, 0.02, [105.0], [21], target="beta", value=-2.0)
        point = implied_point(q, "beta", CTX)
        assert point.flag == "ok"
        assert point.value == pytest.approx(-2.0, abs=1e-6)

    def test_mu_round_trip(self) -> None:
        ctx = CalibrationContext(mu=0.1, sigma=0.5, beta=-1.0)
        (q,) = manufactured_chain(ctx, 100.0, 0.02, [102.0], [1], target="mu", value=0.4)
        point = implied_point(q, "mu", ctx, bounds=(-1.0, 1.0))
        assert point.flag == "ok"
        assert point.value == pytest.approx(0.4, abs=1e-6)

    def test_lambda0_round_trip(self) -> None:
        (q,) = manufactured_chain(CTX, 100.0, 0.05, [100.0], [21], target="lambda0", value=0.5)
        point = implied_point(q, "lambda0", CTX)
        assert point.flag == "ok"
        assert point.value == pytest.approx(0.5, rel=1e-6)

    def test_lambda1_round_trip(self) -> None:
        ctx = replace(CTX, lambda0=0.5)
        (q,) = manufactured_chain(ctx, 100.0, 0.05, [100.0], [21], target="lambda1", value=5.0)
        point = implied_point(q, "lambda1", ctx)
        assert point.flag == "ok"
        assert point.value == pytest.approx(5.0, abs=1e-5)


class TestSurfaces:
    """Surfaces and deviations."""

    def test_surface_ordering_and_frame(self) -> None:
        quotes = manufactured_chain(CTX, 100.0, 0.02, [110.0, 95.0, 100.0], [10, 5], target="sigma", value=0.22)
        surface = build_surface(list(reversed(quotes)), "sigma", CTX)
        assert len(surface) == 6
        assert surface.maturity_days.tolist() == [5, 5, 5, 10, 10, 10]
        assert surface.moneyness.tolist() == pytest.approx([0.95, 1.0, 1.1, 0.95, 1.0, 1.1])
        assert np.allclose(surface.values, 0.22, atol=1e-6)
        assert surface.holes == 0
        frame = surface.to_frame()
        assert list(frame.columns) == ["moneyness", "T_days", "value", "residual", "flag"]

    def test_empty_chain(self) -> None:
        with pytest.raises(InvalidArgumentError):
            build_surface([], "sigma", CTX)

    def test_deviation_modes(self) -> None:
        quotes = manufactured_chain(CTX, 100.0, 0.02, [95.0, 105.0], [10], target="sigma", value=0.22)
        tree = build_surface(quotes, "sigma", CTX)
        bs = build_surface(quotes, "bs_sigma", CTX)
        percent = deviation_surface(tree, bs)
        assert percent.values == pytest.approx(100.0 * (tree.values - bs.values) / bs.values)
        difference = deviation_surface(tree, bs, mode="difference")
        assert difference.values == pytest.approx(tree.values - bs.values)
        assert np.allclose(deviation_surface(tree, tree).values, 0.0)

    def test_deviation_propagates_holes(self) -> None:
        good = quote()
        hole = ImpliedSurface("sigma", (ImpliedPoint(good, "sigma", math.nan, math.nan, "non_identifiable"),))
        base = ImpliedSurface("bs_sigma", (ImpliedPoint(good, "bs_sigma", 0.2, 0.0, "ok"),))
        (point,) = deviation_surface(hole, base).points
        assert point.flag == "non_identifiable"
        assert math.isnan(point.residual)

    def test_deviation_rejects_bad_inputs(self) -> None:
        a = ImpliedSurface("sigma", (ImpliedPoint(quote(), "sigma", 0.2, 0.0, "ok"),))
        zero = ImpliedSurface("bs_sigma", (ImpliedPoint(quote(), "bs_sigma", 0.0, 0.0, "ok"),))
        other = ImpliedSurface("bs_sigma", (ImpliedPoint(quote(strike=90.0), "bs_sigma", 0.2, 0.0, "ok"),))
        with pytest.raises(InvalidArgumentError):
            deviation_surface(a, zero)
        with pytest.raises(InvalidArgumentError):
            deviation_surface(a, other)
        assert deviation_surface(a, zero, mode="difference").values.tolist() == [0.2]


class TestFitHtc:
    """Transaction-cost fit over a chain."""

    STRIKES = [90.0, 95.0, 100.0, 105.0, 110.0]

    def test_cost_free_chain(self) -> None:
        quotes = manufactured_chain(CTX, 100.0, 0.02, self.STRIKES, [10, 21])
        fit = fit_htc(quotes, CTX, starts=(1e-8,), maxiter=200)
        assert fit.quotes == 10
        assert fit.rel_mse < 1e-10
        assert fit.lambda0 + fit.lambda1 * math.sqrt(1 / 252) < 1e-3

    def test_recovers_effective_cost(self) -> None:
        costly = CalibrationContext(mu=0.1, sigma=0.2, beta=-1.0, lambda0=0.05)
        quotes = manufactured_chain(costly, 100.0, 0.02, self.STRIKES, [10, 21])
        fit = fit_htc(quotes, CTX, starts=(0.1,), maxiter=400)
        assert fit.rel_mse < 1e-8
        assert fit.lambda0 + fit.lambda1 * math.sqrt(1 / 252) == pytest.approx(0.05, abs=1e-3)

    def test_needs_ten_quotes(self) -> None:
        quotes = manufactured_chain(CTX, 100.0, 0.02, self.STRIKES, [10])
        with pytest.raises(InvalidArgumentError):
            fit_htc(quotes, CTX)

    def test_every_start_infeasible_returns_incumbent(self, monkeypatch, caplog) -> None:
        def infeasible(*args, **kwargs) -> float:
            raise InfeasibleParameterError("q outside (0, 1)")

        quotes = manufactured_chain(CTX, 100.0, 0.02, self.STRIKES, [10, 21])
        monkeypatch.setattr(implied, "htc_rel_mse", infeasible)
        caplog.set_level(logging.WARNING, logger="src.calibration.implied")
        fit = fit_htc(quotes, CTX, starts=(0.1, 1.0))
        assert (fit.lambda0, fit.lambda1) == (0.1, 0.0)
        assert math.isinf(fit.rel_mse)
        assert not fit.converged
        assert fit.quotes == 10
        assert "infeasible" in caplog.text

    def test_needs_a_start(self) -> None:
        quotes = manufactured_chain(CTX, 100.0, 0.02, self.STRIKES, [10, 21])
        with pytest.raises(InvalidArgumentError):
            fit_htc(quotes, CTX, starts=())
