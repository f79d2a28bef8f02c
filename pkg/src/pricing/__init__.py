"""Risk-neutral, Black-Scholes and path-dependent pricing."""
