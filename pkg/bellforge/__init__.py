"""Monte Carlo laboratory for the nonlocality strength of multiqubit states."""

__version__ = "1.0.0"
