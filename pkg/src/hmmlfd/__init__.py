"""Learning trajectory skills from demonstrations with key-points, a left-right HMM and DTW."""

__version__ = "0.1.0"
