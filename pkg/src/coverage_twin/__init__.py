"""Two-tier RSRP coverage prediction on a synthetic digital-twin scenario."""

__version__ = "0.1.0"
