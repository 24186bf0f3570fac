# src/equilib/logging.py
import logging
import sys

ROOT_LOGGER = "equilib"
_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def _configure(root: logging.Logger, verbose: bool) -> None:
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(_FORMAT))
    # Quiet runs still surface divergence and rank warnings.
    handler.setLevel(logging.DEBUG if verbose else logging.WARNING)
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.propagate = False


def get_logger(name: str = ROOT_LOGGER, verbose: bool | None = None) -> logging.Logger:
    """Logger under the ``equilib`` hierarchy.

    ``verbose=None`` leaves an existing configuration alone, so library code can
    ask for a logger without undoing the CLI's ``--verbose``.
    """

    root = logging.getLogger(ROOT_LOGGER)
    if verbose is not None or not root.handlers:
        _configure(root, bool(verbose))
    return logging.getLogger(name)
