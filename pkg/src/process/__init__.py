"""Skew Brownian motion and skew random walk."""
