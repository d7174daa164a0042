"""Shared fixtures for functional tests."""

from __future__ import annotations

import pathlib

import pytest

from .chains import SCENARIOS_DIR


@pytest.fixture
def scenarios_dir() -> pathlib.Path:
    """Return the shipped example scenarios."""
    return SCENARIOS_DIR
