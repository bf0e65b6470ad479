"""Multi-band (S+C+L) WDM link budget, throughput and launch-tilt planning."""

__version__ = "0.1.0"
