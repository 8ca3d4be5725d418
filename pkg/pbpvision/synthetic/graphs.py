import typing

import numpy as np

from ..inference.graph import Domain, FactorGraph, table_pairwise, table_unary
from ..inference.mcmc import RngStream, as_stream


def random_tree_graph(
    n_nodes: int, max_labels: int = 5, rng: RngStream = None, coupling: float = 1.0
) -> FactorGraph:
    """
    Discrete tree: node k > 0 hangs off a uniformly chosen earlier node, label
    counts are drawn from 2..max_labels and log-potentials are Gaussian.
    """
    rng = as_stream(rng)
    graph = FactorGraph()
    sizes = rng.integers(2, max_labels + 1, size=n_nodes)
    for k in range(n_nodes):
        graph.add_variable(Domain.discrete(int(sizes[k])), table_unary(rng.normal(size=sizes[k])))
    for k in range(1, n_nodes):
        parent = int(rng.integers(k))
        graph.add_edge(parent, k, table_pairwise(coupling * rng.normal(size=(sizes[parent], sizes[k]))))
    return graph


def chain_graph(unaries: typing.Sequence[np.ndarray], pairwise: typing.Sequence[np.ndarray]) -> FactorGraph:
    """Chain 0 - 1 - ... - n-1 from explicit log tables"""
    graph = FactorGraph()
    for log_values in unaries:
        graph.add_variable(Domain.discrete(len(log_values)), table_unary(log_values))
    for s, log_table in enumerate(pairwise):
        graph.add_edge(s, s + 1, table_pairwise(log_table))
    return graph


def bench_graphs(
    n_graphs: int = 50, max_nodes: int = 6, max_labels: int = 5, rng: RngStream = None
) -> typing.List[FactorGraph]:
    """Bundled tiny trees for the exact-inference benchmark, graph g drawn from rng.child(g)"""
    rng = as_stream(rng)
    graphs = []
    for g in range(n_graphs):
        stream = rng.child(g)
        n_nodes = int(stream.integers(1, max_nodes + 1))
        graphs.append(random_tree_graph(n_nodes, max_labels, stream))
    return graphs
