"""Bearing-only cooperative target localization and multi-agent pursuit."""

__version__ = "0.1.0"
