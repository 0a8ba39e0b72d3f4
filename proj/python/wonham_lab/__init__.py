"""Wonham filter stability lab: Python bindings for the C++ core."""

from ._core import *  # noqa: F401,F403
from ._core import WonhamError, __version__  # noqa: F401
