"""Shared fixtures: the verification corpus, built once per session."""

from __future__ import annotations

import pytest

from dirmax.instances import build_corpus


@pytest.fixture(scope="session")
def corpus():
    return build_corpus()
