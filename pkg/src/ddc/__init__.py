"""Data-driven robust and H-infinity state feedback via a data-based descriptor model."""

__version__ = "0.1.0"
