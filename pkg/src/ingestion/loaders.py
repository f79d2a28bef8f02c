"""CSV loaders for price series, option chains and factor panels.

Rows are validated one at a time; a bad row is dropped and recorded in an
``IngestReport`` with its file line number (the header is line 1). A file
that yields no usable rows raises ``DataError``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd

from src.calibration.implied import OptionQuote
from src.drivers.market_driver import FACTOR_COLUMNS, RF_COLUMN, FactorPanel
from src.estimation.estimator import ReturnSeries
from src.utils.errors import DataError

logger = logging.getLogger(__name__)

PRICE_COLUMNS = ["date", "close"]
CHAIN_COLUMNS = ["quote_date", "expiry", "strike", "kind", "bid", "ask", "spot"]


@dataclass
class IngestReport:
    """Accepted row count and (line, reason) pairs for every dropped row."""

    path: str = ""
    accepted: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    def reject(self, line: int, reason: str) -> None:
        self.rejected.append((line, reason))
        logger.warning("%s line %d dropped: %s", self.path, line, reason)

    def reasons(self) -> list[str]:
        return [reason for _, reason in self.rejected]

    def as_dict(self) -> dict:
        return {
            "path": self.path,
            "accepted": self.accepted,
            "rejected": [{"line": line, "reason": reason} for line, reason in self.rejected],
        }


def _read(path: str | Path, required: list[str], report: IngestReport) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True, comment="#")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataError(f"cannot parse {path}: {e}") from e
    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataError(f"{path} is missing columns: {', '.join(missing)}")
    report.path = str(path)
    return frame


def _line(index: int) -> int:
    return int(index) + 2


def _parse_date(text: str | float) -> date:
    value = str(text).strip()
    if len(value) == 8 and value.isdigit():
        return pd.Timestamp(f"{value[:4]}-{value[4:6]}-{value[6:]}").date()
    return date.fromisoformat(value)


def _finalize(rows: list, report: IngestReport, what: str) -> None:
    report.accepted = len(rows)
    if not rows:
        raise DataError(f"no valid {what} rows in {report.path}")
    logger.info("Loaded %d %s rows from %s (%d dropped)", len(rows), what, report.path, len(report.rejected))


def load_price_frame(path: str | Path, report: IngestReport | None = None) -> pd.Series:
    """Closing prices indexed by date, sorted, first occurrence of a date kept."""
    report = report if report is not None else IngestReport()
    frame = _read(path, PRICE_COLUMNS, report)
    rows: dict[date, float] = {}
    for index, record in frame.iterrows():
        line = _line(index)
        try:
            day = _parse_date(record["date"])
            close = float(record["close"])
        except (TypeError, ValueError):
            report.reject(line, "malformed row")
            continue
        if not np.isfinite(close) or close <= 0:
            report.reject(line, "non-positive price")
        elif day in rows:
            report.reject(line, "duplicate date")
        else:
            rows[day] = close
    _finalize(list(rows), report, "price")
    series = pd.Series(rows, name="close").sort_index()
    series.index = pd.DatetimeIndex(series.index, name="date")
    return series


def ingest_prices(path: str | Path, report: IngestReport | None = None, dt: float = 1.0 / 252) -> ReturnSeries:
    """Cumulative log-return series R_0 = 0, R_k = ln(S_k / S_0)."""
    closes = load_price_frame(path, report)
    return ReturnSeries.from_prices(closes.index.to_numpy(dtype="datetime64[D]"), closes.to_numpy(), dt)


def ingest_chain(
    path: str | Path, report: IngestReport | None = None, rf: float | None = None
) -> list[OptionQuote]:
    """Option quotes with positive mids on live contracts.

    The ``rf`` column is read per quote; ``rf`` given here is the constant
    fallback for files without the column or rows with it blank.
    """
    report = report if report is not None else IngestReport()
    frame = _read(path, CHAIN_COLUMNS, report)
    if RF_COLUMN.lower() not in frame.columns and rf is None:
        raise DataError(f"{path} has no rf column and no constant rate was given")

    quotes: dict[tuple, OptionQuote] = {}
    for index, record in frame.iterrows():
        line = _line(index)
        try:
            quote_date = _parse_date(record["quote_date"])
            expiry = _parse_date(record["expiry"])
            strike, bid, ask, spot = (float(record[c]) for c in ("strike", "bid", "ask", "spot"))
            rate_text = record.get("rf")
            rate = float(rate_text) if isinstance(rate_text, str) and rate_text.strip() else rf
            kind = str(record["kind"]).strip().lower()
        except (TypeError, ValueError):
            report.reject(line, "malformed row")
            continue

        if kind not in ("call", "put"):
            report.reject(line, "unknown kind")
        elif rate is None or not np.isfinite(rate):
            report.reject(line, "missing rate")
        elif not (strike > 0 and spot > 0):
            report.reject(line, "non-positive strike or spot")
        elif bid > ask:
            report.reject(line, "crossed quote")
        elif expiry <= quote_date or np.busday_count(quote_date, expiry) < 1:
            report.reject(line, "expired contract")
        elif not 0.5 * (bid + ask) > 0:
            report.reject(line, "non-positive mid")
        else:
            key = (quote_date, expiry, strike, kind)
            if key in quotes:
                report.reject(line, "duplicate contract")
                continue
            quotes[key] = OptionQuote(quote_date, expiry, strike, kind, bid, ask, spot, rate)

    _finalize(list(quotes), report, "option")
    return [quotes[key] for key in sorted(quotes)]


def ingest_factors(
    path: str | Path, report: IngestReport | None = None, percent: bool = True
) -> FactorPanel:
    """Daily five-factor panel; ``percent`` divides every column by 100."""
    report = report if report is not None else IngestReport()
    columns = FACTOR_COLUMNS + [RF_COLUMN]
    frame = _read(path, ["date"] + columns, report)
    rows: dict[date, list[float]] = {}
    for index, record in frame.iterrows():
        line = _line(index)
        try:
            day = _parse_date(record["date"])
            values = [float(record[c]) for c in columns]
        except (TypeError, ValueError):
            report.reject(line, "malformed row")
            continue
        if not np.all(np.isfinite(values)):
            report.reject(line, "non-finite value")
        elif day in rows:
            report.reject(line, "duplicate date")
        else:
            rows[day] = values

    _finalize(list(rows), report, "factor")
    table = pd.DataFrame.from_dict(rows, orient="index", columns=columns).sort_index()
    table.index = pd.DatetimeIndex(table.index, name="date")
    if percent:
        table = table / 100.0
    return FactorPanel(table)
