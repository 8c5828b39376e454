import functools

import pytest

from mdplc import domains
from mdplc.grounder import build_graph
from mdplc.parser import parse_domain
from mdplc.refine import refine
from mdplc.rewards import annotate


@functools.lru_cache(maxsize=None)
def pipeline(name: str):
    """Bundled domain -> (spec, refined graph). Cached: treat results as read-only."""
    d = parse_domain(domains.load(name))
    g = refine(build_graph(d))
    return d, g


@functools.lru_cache(maxsize=None)
def pipeline_annotated(name: str, sign: int = 1):
    d, g = pipeline(name)
    return d, annotate(g, d, sign=sign)


def compile_text(text: str):
    d = parse_domain(text)
    return d, refine(build_graph(d))


@pytest.fixture(scope="session")
def bundled_names():
    return domains.names()


@pytest.fixture
def agv():
    return pipeline("agv_t1")


@pytest.fixture
def structure():
    return pipeline("structure_t1")
