"""Threshold-shared approximate nearest-neighbor search over layered
bitgraph indexes, with cost counters and leakage metrics."""

__version__ = "0.1.0"
