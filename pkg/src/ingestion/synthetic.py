"""Synthetic inputs with known generating parameters.

Used by ``scripts/make_fixtures.py`` and the test-suite: a GJR price series,
an option chain priced by the model itself, and a five-factor panel with a
stock whose loadings are known.
"""

from __future__ import annotations

from datetime import date
from typing import Sequence

import numpy as np
import pandas as pd

from src.calibration.implied import CalibrationContext, OptionQuote, model_price
from src.drivers.market_driver import FACTOR_COLUMNS, RF_COLUMN
from src.process.skew_process import skew_walk_path
from src.tree.gjr_tree import NaturalParams, build_tree, path_prices
from src.utils.rng import make_rng

FIXTURE_START = date(2019, 1, 2)
TRUE_LOADINGS = {"a": 1e-4, "b": 1.05, "s": -0.2, "h": 0.15, "r": 0.1, "c": -0.05}


def synthetic_prices(params: NaturalParams, seed: int, start: date = FIXTURE_START) -> pd.DataFrame:
    """One GJR path of ``params.n`` steps on consecutive business days (columns date, close)."""
    path = skew_walk_path(params.alpha_dt, params.n, seed)
    closes = path_prices(build_tree(params), path.steps)
    dates = pd.bdate_range(start, periods=params.n + 1)
    return pd.DataFrame({"date": dates.strftime("%Y-%m-%d"), "close": closes})


def manufactured_chain(
    ctx: CalibrationContext,
    spot: float,
    rf: float,
    strikes: Sequence[float],
    maturities: Sequence[int],
    *,
    target: str | None = None,
    value: float | None = None,
    kind: str = "call",
    quote_date: date = date(2021, 6, 1),
    half_spread: float = 0.0,
) -> list[OptionQuote]:
    """Quotes whose mid is the model price; ``maturities`` are trading days."""
    quotes = []
    for days in maturities:
        expiry = np.busday_offset(np.datetime64(quote_date, "D"), int(days), roll="forward")
        expiry_date = pd.Timestamp(expiry).date()
        for strike in strikes:
            unpriced = OptionQuote(quote_date, expiry_date, float(strike), kind, 0.0, 0.0, spot, rf)
            mid = model_price(unpriced, ctx, target, value)
            quotes.append(
                OptionQuote(
                    quote_date, expiry_date, float(strike), kind,
                    max(mid - half_spread, 0.0), mid + half_spread, spot, rf,
                )
            )
    return quotes


def chain_frame(quotes: Sequence[OptionQuote]) -> pd.DataFrame:
    """CSV layout read by ``ingest_chain``."""
    return pd.DataFrame(
        {
            "quote_date": [q.quote_date.isoformat() for q in quotes],
            "expiry": [q.expiry_date.isoformat() for q in quotes],
            "strike": [q.strike for q in quotes],
            "kind": [q.kind for q in quotes],
            "bid": [q.bid for q in quotes],
            "ask": [q.ask for q in quotes],
            "spot": [q.spot for q in quotes],
            "rf": [q.rf for q in quotes],
        }
    )


def synthetic_factor_panel(
    days: int, seed: int, start: date = FIXTURE_START, s0: float = 100.0, noise: float = 2e-3
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Factor returns in percent units and a stock whose log-returns load on ``TRUE_LOADINGS``.

    Returns:
        (factors, prices): factors has a YYYYMMDD ``date`` column as in the
        public daily files; prices has ``date`` and ``close`` with one more
        row than factors (the first close precedes the first factor date).
    """
    rng = make_rng(seed)
    dates = pd.bdate_range(start, periods=days + 1)
    factors = rng.normal(0.0, [1.0, 0.5, 0.5, 0.3, 0.3], size=(days, 5)) * 1e-2
    rf = np.full(days, 0.0162 / 252)
    loadings = np.array([TRUE_LOADINGS[k] for k in ("b", "s", "h", "r", "c")])
    stock = rf + TRUE_LOADINGS["a"] + factors @ loadings + rng.normal(0.0, noise, days)

    factor_table = pd.DataFrame(factors * 100.0, columns=FACTOR_COLUMNS)
    factor_table[RF_COLUMN] = rf * 100.0
    factor_table.insert(0, "date", dates[1:].strftime("%Y%m%d"))
    closes = s0 * np.exp(np.concatenate(([0.0], np.cumsum(stock))))
    prices = pd.DataFrame({"date": dates.strftime("%Y-%m-%d"), "close": closes})
    return factor_table, prices
