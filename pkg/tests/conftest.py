"""Shared fixtures: the bundled corpus, loaded once per session."""

from __future__ import annotations

import pytest

from fesqueeze.corpus import load_corpus


@pytest.fixture(scope="session")
def corpus():
    load = load_corpus()
    assert not load.errors, [f"{e.file}: {e.message}" for e in load.errors]
    return load


@pytest.fixture(scope="session")
def problems(corpus):
    return {p.name: p for p in corpus.problems}
