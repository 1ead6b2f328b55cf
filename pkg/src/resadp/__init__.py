"""Data-driven optimal output regulation under denial-of-service attacks."""

from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"
