"""Adaptive spatial Aloha: MAP optimizers and stochastic-geometry analytics."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
