"""Nonlinearly preconditioned gradient methods."""

from ._nlpgm import *  # noqa: F401,F403
from ._nlpgm import __version__  # noqa: F401
