"""Write synthetic fixtures: GJR prices, a model-priced option chain and a factor panel."""

import argparse
import os
import sys
from pathlib import Path

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.calibration.implied import CalibrationContext
from src.ingestion.synthetic import (
    chain_frame,
    manufactured_chain,
    synthetic_factor_panel,
    synthetic_prices,
)
from src.tree.gjr_tree import NaturalParams


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output-dir", default="./data/fixtures")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    output_dir = Path(args.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    # Step 1: two years of daily GJR prices
    params = NaturalParams(mu=0.119, sigma=0.151, beta=-0.978, n=504, s0=419.67)
    prices = synthetic_prices(params, seed=args.seed)
    prices.to_csv(output_dir / "gjr_prices.csv", index=False)
    print(f"gjr_prices.csv: {len(prices)} rows")

    # Step 2: call chain priced on the tree at sigma = 0.25
    ctx = CalibrationContext(mu=0.119, sigma=0.25, beta=-0.978)
    quotes = manufactured_chain(
        ctx, spot=419.67, rf=0.0162, strikes=[380, 400, 420, 440, 460], maturities=[5, 10, 21, 42]
    )
    chain_frame(quotes).to_csv(output_dir / "chain.csv", index=False)
    print(f"chain.csv: {len(quotes)} quotes")

    # Step 3: factor panel in percent units with its stock
    factors, stock = synthetic_factor_panel(days=300, seed=args.seed)
    factors.to_csv(output_dir / "factors.csv", index=False)
    stock.to_csv(output_dir / "stock.csv", index=False)
    print(f"factors.csv: {len(factors)} rows, stock.csv: {len(stock)} rows")

    print(f"\nDone! Fixtures written to {output_dir}")


if __name__ == "__main__":
    main()
