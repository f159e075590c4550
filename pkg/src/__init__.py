"""Global density propagation and Bayesian attitude estimation on SO(3) x R^3."""

__version__ = "0.1.0"
TOOL_NAME = "so3-density-propagator"
