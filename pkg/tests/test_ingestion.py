"""Tests for the CSV loaders and synthetic fixtures."""

from __future__ import annotations

from datetime import date
from pathlib import Path

import numpy as np
import pytest

from src.calibration.implied import CalibrationContext, model_price
from src.ingestion.loaders import (
    IngestReport,
    ingest_chain,
    ingest_factors,
    ingest_prices,
    load_price_frame,
)
from src.ingestion.synthetic import (
    chain_frame,
    manufactured_chain,
    synthetic_factor_panel,
    synthetic_prices,
)
from src.tree.gjr_tree import NaturalParams
from src.utils.errors import DataError

CHAIN_HEADER = "quote_date,expiry,strike,kind,bid,ask,spot,rf\n"


def write(tmp_path: Path, name: str, text: str) -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


class TestPriceLoader:
    """Closing-price files."""

    def test_valid_file(self, tmp_path: Path) -> None:
        path = write(tmp_path, "p.csv", "date,close\n2021-01-05,101\n2021-01-04,100\n2021-01-06,99\n")
        series = ingest_prices(path)
        assert len(series) == 3
        assert str(series.dates[0]) == "2021-01-04"
        assert series.cum_log_returns[1] == pytest.approx(np.log(1.01))

    def test_bad_rows_are_reported(self, tmp_path: Path) -> None:
        text = "date,close\n2021-01-04,100\nnot-a-date,5\n2021-01-05,-3\n2021-01-04,102\n2021-01-06,98\n"
        report = IngestReport()
        closes = load_price_frame(write(tmp_path, "p.csv", text), report)
        assert len(closes) == 2
        assert closes.iloc[0] == 100.0
        assert report.accepted == 2
        assert report.rejected == [(3, "malformed row"), (4, "non-positive price"), (5, "duplicate date")]
        assert report.as_dict()["rejected"][0] == {"line": 3, "reason": "malformed row"}

    def test_comment_lines_skipped(self, tmp_path: Path) -> None:
        path = write(tmp_path, "p.csv", "# exported prices\ndate,close\n2021-01-04,100\n2021-01-05,101\n")
        assert len(load_price_frame(path)) == 2

    def test_missing_or_empty(self, tmp_path: Path) -> None:
        with pytest.raises(DataError):
            ingest_prices(tmp_path / "absent.csv")
        with pytest.raises(DataError):
            ingest_prices(write(tmp_path, "p.csv", "date,close\n2021-01-04,0\n"))
        with pytest.raises(DataError):
            ingest_prices(write(tmp_path, "q.csv", "day,price\n2021-01-04,1\n"))


class TestChainLoader:
    """Option chain files."""

    def test_rejection_reasons(self, tmp_path: Path) -> None:
        rows = [
            "2021-06-01,2021-06-15,100,call,1.0,1.2,100,0.02",
            "2021-06-01,2021-06-15,100,straddle,1.0,1.2,100,0.02",
            "2021-06-01,2021-06-15,0,put,1.0,1.2,100,0.02",
            "2021-06-01,2021-06-15,100,put,1.5,1.2,100,0.02",
            "2021-06-01,2021-05-15,100,put,1.0,1.2,100,0.02",
            "2021-06-01,2021-06-15,100,put,0,0,100,0.02",
            "2021-06-01,2021-06-15,100,CALL,1.1,1.3,100,0.02",
            "2021-06-01,2021-06-15,abc,put,1.0,1.2,100,0.02",
            "2021-06-01,2021-06-15,95,put,0.5,0.6,100,",
        ]
        report = IngestReport()
        quotes = ingest_chain(write(tmp_path, "c.csv", CHAIN_HEADER + "\n".join(rows) + "\n"), report)
        assert len(quotes) == 1
        assert quotes[0].mid == pytest.approx(1.1)
        assert report.reasons() == [
            "unknown kind",
            "non-positive strike or spot",
            "crossed quote",
            "expired contract",
            "non-positive mid",
            "duplicate contract",
            "malformed row",
            "missing rate",
        ]

    def test_constant_rate_fallback(self, tmp_path: Path) -> None:
        text = "quote_date,expiry,strike,kind,bid,ask,spot\n2021-06-01,2021-06-15,95,put,0.5,0.6,100\n"
        path = write(tmp_path, "c.csv", text)
        (q,) = ingest_chain(path, rf=0.03)
        assert q.rf == 0.03
        with pytest.raises(DataError):
            ingest_chain(path)


class TestFactorLoader:
    """Five-factor panels."""

    def test_percent_units_and_dates(self, tmp_path: Path) -> None:
        text = (
            "date,Mkt-RF,SMB,HML,RMW,CMA,RF\n"
            "20210104,1.0,0.5,-0.2,0.1,0.0,0.01\n"
            "20210105,-0.5,0.1,0.3,-0.1,0.2,0.01\n"
        )
        panel = ingest_factors(write(tmp_path, "f.csv", text))
        assert len(panel) == 2
        assert panel.frame["Mkt-RF"].iloc[0] == pytest.approx(0.01)
        assert str(panel.frame.index[1].date()) == "2021-01-05"
        decimal = ingest_factors(write(tmp_path, "g.csv", text), percent=False)
        assert decimal.frame["Mkt-RF"].iloc[0] == 1.0

    def test_missing_column(self, tmp_path: Path) -> None:
        with pytest.raises(DataError):
            ingest_factors(write(tmp_path, "f.csv", "date,Mkt-RF\n20210104,1.0\n"))


class TestSyntheticFixtures:
    """Generated inputs load back through the loaders."""

    def test_prices(self, tmp_path: Path) -> None:
        frame = synthetic_prices(NaturalParams(mu=0.1, sigma=0.2, beta=-1.0, n=40, s0=50.0), seed=1)
        assert len(frame) == 41
        frame.to_csv(tmp_path / "p.csv", index=False)
        assert len(ingest_prices(tmp_path / "p.csv")) == 41

    def test_chain_mids_are_model_prices(self, tmp_path: Path) -> None:
        ctx = CalibrationContext(mu=0.1, sigma=0.2, beta=-1.0)
        quotes = manufactured_chain(ctx, 100.0, 0.02, [95.0, 105.0], [5, 10], half_spread=0.01)
        assert all(q.trading_days in (5, 10) for q in quotes)
        assert quotes[0].quote_date == date(2021, 6, 1)
        chain_frame(quotes).to_csv(tmp_path / "c.csv", index=False)
        loaded = ingest_chain(tmp_path / "c.csv")
        assert len(loaded) == 4
        for q in loaded:
            assert q.mid == pytest.approx(model_price(q, ctx), rel=1e-12)

    def test_factor_panel_round_trip(self, tmp_path: Path) -> None:
        factors, prices = synthetic_factor_panel(days=80, seed=2)
        assert len(prices) == len(factors) + 1
        factors.to_csv(tmp_path / "f.csv", index=False)
        panel = ingest_factors(tmp_path / "f.csv")
        assert len(panel) == 80
        assert panel.frame["RF"].iloc[0] == pytest.approx(0.0162 / 252)
