"""Postselected weak measurement: rational second-order expansion vs exact evolution."""

__version__ = "0.1.0"
