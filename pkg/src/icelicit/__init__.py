"""Incentive-compatible preference and belief elicitation mechanisms."""

__version__ = "0.1.0"
