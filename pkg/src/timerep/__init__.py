"""Prior and learned time representations for transformer timeseries models."""

__version__ = "0.1.0"
