"""thermolimit - Monte Carlo laboratory for random nuclear configurations."""

__version__ = "0.4.0"
