"""
Logging setup shared by the command-line driver and tests.

Library modules only call ``logging.getLogger(__name__)``; handlers are attached
here, once, by whoever owns the process.
"""

from __future__ import annotations

import logging
import sys

from pythonjsonlogger.json import JsonFormatter

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s %(message)s"


def configure_logging(level: str | int = "INFO", *, json_format: bool = True) -> logging.Logger:
    """
    Attach a single stderr handler to the ``src`` logger hierarchy.

    Calling this again replaces the previous handler rather than stacking a
    second one.
    """
    root = logging.getLogger("src")
    for handler in list(root.handlers):
        root.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    if json_format:
        handler.setFormatter(JsonFormatter(LOG_FORMAT))
    else:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)
    root.propagate = False
    return root
