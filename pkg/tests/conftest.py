import importlib.resources as ir

import pytest

from collabgraph import metamodel as metamodel_mod


def _sample(name):
    return (ir.files("collabgraph") / "samples" / name).read_text()


@pytest.fixture(scope="session")
def flowchart_text():
    return _sample("flowchart.yaml")


@pytest.fixture(scope="session")
def flowchart_spec(flowchart_text):
    return metamodel_mod.parse_metamodel(flowchart_text)


@pytest.fixture(scope="session")
def petrinet_spec():
    return metamodel_mod.parse_metamodel(_sample("petrinet.yaml"))
