import json
from pathlib import Path

import pytest

from reason_forge.graph import from_dict

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def school_example():
    """Hand-checked reverse-mode example: question, solution, answer, gold graph."""
    with open(DATA / "school_example.json") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def school_graph(school_example):
    return from_dict(school_example["graph"])
