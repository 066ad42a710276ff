import numpy as np
import pytest

from misconfig_lab.faults import exas_ranks
from misconfig_lab.graph import DST, EXAS, GATEWAY, ROUTER, EdgeType, build_graph
from misconfig_lab.protocol import Configuration

OSPF, EBGP = EdgeType.OSPF, EdgeType.EBGP


def attrs(local_pref=100, med=0, origin=0, as_path_len=1, cisco_weight=0, exas_index=0):
    return (local_pref, med, origin, as_path_len, cisco_weight, exas_index)


def line_config(graph, weights=None, bgp=None):
    """Configuration with unit (or given) OSPF weights and default BGP attributes."""
    w = {}
    for u, v in graph.edges_of(OSPF):
        x = (weights or {}).get((u, v), (weights or {}).get((v, u), 1))
        w[(u, v)] = w[(v, u)] = x
    idx = exas_ranks(graph)
    b = {}
    for k, ms in graph.dst_attachment.items():
        for m in ms:
            b[(m, k)] = (bgp or {}).get((m, k), attrs(exas_index=idx[(m, k)]))
    return Configuration(w, b)


@pytest.fixture
def minimal_graph():
    # routers 0 (gateway) and 1, exas 2, dst 3
    return build_graph([GATEWAY, ROUTER, EXAS, DST], [(0, 1, OSPF), (0, 2, EBGP)], {3: [2]})


@pytest.fixture
def fig1_graph():
    """R1=0, R2=1 (gateway to AS1=3), R3=2 (gateway to AS2=4), dst1=5 behind both ASes."""
    return build_graph(
        [ROUTER, GATEWAY, GATEWAY, EXAS, EXAS, DST],
        [(0, 1, OSPF), (0, 2, OSPF), (1, 2, OSPF), (1, 3, EBGP), (2, 4, EBGP)],
        {5: [3, 4]},
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
