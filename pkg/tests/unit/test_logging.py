from __future__ import annotations

import logging

import pytest

from equilib.logging import ROOT_LOGGER, get_logger


def test_quiet_logger_only_passes_warnings(capsys: pytest.CaptureFixture[str]) -> None:
    logger = get_logger("equilib.test.quiet", verbose=False)
    root = logging.getLogger(ROOT_LOGGER)
    assert root.propagate is False
    assert root.handlers[0].level == logging.WARNING
    logger.info("epoch finished")
    logger.warning("rank deficient")
    err = capsys.readouterr().err
    assert "epoch finished" not in err
    assert "rank deficient" in err


def test_verbose_logger_reports_progress(capsys: pytest.CaptureFixture[str]) -> None:
    logger = get_logger("equilib.test.verbose", verbose=True)
    assert logging.getLogger(ROOT_LOGGER).level == logging.DEBUG
    logger.debug("checkpoint written")
    assert "equilib.test.verbose: checkpoint written" in capsys.readouterr().err


def test_library_lookup_keeps_cli_verbosity() -> None:
    get_logger("equilib.test.cli", verbose=True)
    get_logger("equilib.test.library")
    assert logging.getLogger(ROOT_LOGGER).handlers[0].level == logging.DEBUG
    get_logger(verbose=False)
