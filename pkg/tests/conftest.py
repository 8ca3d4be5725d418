import numpy as np
import pytest

from pbpvision.inference.graph import table_pairwise
from pbpvision.inference.mcmc import RngStream
from pbpvision.synthetic.graphs import chain_graph, random_tree_graph


@pytest.fixture
def rng():
    return RngStream(1234)


@pytest.fixture
def tree_graph():
    return random_tree_graph(5, 4, RngStream(7))


@pytest.fixture
def chain3():
    """3-node chain with 5 states per node"""
    stream = RngStream(11)
    unaries = [stream.normal(size=5) for _ in range(3)]
    pairwise = [stream.normal(size=(5, 5)) for _ in range(2)]
    return chain_graph(unaries, pairwise)


@pytest.fixture
def loop_graph():
    """4-cycle with weak couplings, where loopy BP converges"""
    stream = RngStream(13)
    graph = chain_graph(
        [stream.normal(size=3) for _ in range(4)],
        [0.3 * stream.normal(size=(3, 3)) for _ in range(3)],
    )
    graph.add_edge(3, 0, table_pairwise(0.3 * stream.normal(size=(3, 3))))
    return graph
