"""Multi-UAV downlink Markov game simulator with graph-attention trust-region MARL."""

__version__ = "0.1.0"
