"""Implied-parameter surfaces and transaction-cost fitting."""
