"""Leverage-cycle simulation engine.

A multi-asset agent-based model of VaR-constrained banks, two reduced
dynamical-systems models with analytic stability checks, and a grid-sweep
harness for the policy experiments built on top of them.
"""

__version__ = "0.1.0"

from .config import FullModelConfig, Map2DConfig, VarEquityConfig  # noqa: F401
