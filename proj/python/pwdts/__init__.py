"""Power-weighted densities for time-series forecasting."""

from ._core import *  # noqa: F401,F403
from ._core import __version__, run_cli

__all__ = ["__version__", "run_cli"]
