"""GJR skew random walk pricing toolkit."""

__version__ = "0.1.0"
