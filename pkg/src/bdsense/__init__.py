"""BD-RIS monostatic OFDM sensing: simulation, estimation, and benchmarks."""

__version__ = "0.1.0"
