import numpy as np
import pytest

from pbpvision.errors import (
    ConfigError,
    DomainMismatchError,
    EvaluationError,
    OracleInfeasibleError,
    UnnormalizableError,
)
from pbpvision.inference.graph import (
    Domain,
    FactorGraph,
    assignment_indices,
    brute_force_joint,
    brute_force_map,
    brute_force_marginals,
    energy,
    log_partition,
    table_pairwise,
    table_unary,
)


def two_node_graph():
    graph = FactorGraph()
    graph.add_variable(Domain.discrete(2), table_unary([0.0, np.log(2.0)]))
    graph.add_variable(Domain.discrete(3), table_unary([0.0, 0.0, np.log(3.0)]))
    graph.add_edge(0, 1, table_pairwise(np.log([[1.0, 2.0, 1.0], [1.0, 1.0, 4.0]])))
    return graph


def test_energy_is_negative_log_potential():
    graph = two_node_graph()
    assert energy(graph, {0: 1, 1: 2}) == pytest.approx(-np.log(2.0 * 3.0 * 4.0))
    assert energy(graph, [0, 0]) == pytest.approx(0.0)


def test_joint_sums_to_one_and_matches_hand_computation():
    graph = two_node_graph()
    weights = np.array([[1, 2, 3], [2, 2, 24]], dtype=float)
    joint = brute_force_joint(graph)
    np.testing.assert_allclose(joint, weights / weights.sum())
    assert log_partition(graph) == pytest.approx(np.log(weights.sum()))
    marginals = brute_force_marginals(graph)
    np.testing.assert_allclose(marginals[0], weights.sum(axis=1) / weights.sum())
    np.testing.assert_allclose(marginals[1], weights.sum(axis=0) / weights.sum())


def test_brute_force_map_picks_highest_joint_state():
    graph = two_node_graph()
    best = brute_force_map(graph)
    assert assignment_indices(graph, best).tolist() == [1, 2]


def test_map_ties_go_to_smallest_index_tuple():
    graph = FactorGraph()
    graph.add_variable(Domain.discrete(3))
    graph.add_variable(Domain.discrete(3))
    best = brute_force_map(graph)
    assert assignment_indices(graph, best).tolist() == [0, 0]


def test_edge_is_stored_once_and_orientation_is_respected():
    graph = FactorGraph()
    graph.add_variable(Domain.discrete(2))
    graph.add_variable(Domain.discrete(3))
    table = np.arange(6, dtype=float).reshape(3, 2)
    graph.add_edge(1, 0, table_pairwise(table))
    assert graph.edges == [(0, 1)]
    np.testing.assert_allclose(graph.pairwise_table(0, 1), table.T)
    np.testing.assert_allclose(graph.pairwise_table(1, 0), table)
    with pytest.raises(ConfigError):
        graph.add_edge(0, 1, table_pairwise(table.T))


def test_self_edge_and_unknown_variable_are_rejected():
    graph = FactorGraph()
    graph.add_variable(Domain.discrete(2))
    with pytest.raises(ConfigError):
        graph.add_edge(0, 0, table_pairwise(np.zeros((2, 2))))
    with pytest.raises(ConfigError):
        graph.add_edge(0, 3, table_pairwise(np.zeros((2, 2))))


def test_finite_domain_values_are_checked():
    graph = two_node_graph()
    with pytest.raises(DomainMismatchError):
        energy(graph, {0: 5, 1: 0})
    with pytest.raises(DomainMismatchError):
        energy(graph, {0: 0})


def test_finite_domain_with_arbitrary_labels():
    domain = Domain.finite([[0.5, 1.0], [2.0, -1.0]])
    assert domain.size == 2
    assert domain.dimension == 2
    assert domain.index_of([2.0, -1.0]) == 1
    with pytest.raises(ConfigError):
        Domain.finite([])


def test_positive_infinity_and_nan_potentials_are_rejected():
    graph = FactorGraph()
    graph.add_variable(Domain.discrete(2), table_unary([0.0, np.inf]))
    with pytest.raises(EvaluationError):
        brute_force_marginals(graph)
    graph = FactorGraph()
    graph.add_variable(Domain.discrete(2), table_unary([0.0, np.nan]))
    with pytest.raises(EvaluationError):
        log_partition(graph)


def test_negative_infinity_forbids_a_state():
    graph = FactorGraph()
    graph.add_variable(Domain.discrete(3), table_unary([-np.inf, 0.0, 0.0]))
    marginals = brute_force_marginals(graph)
    np.testing.assert_allclose(marginals[0], [0.0, 0.5, 0.5])


def test_all_states_forbidden_is_unnormalizable():
    graph = FactorGraph()
    graph.add_variable(Domain.discrete(2), table_unary([-np.inf, -np.inf]))
    with pytest.raises(UnnormalizableError):
        brute_force_marginals(graph)


def test_oracles_refuse_particle_domains_and_huge_graphs():
    graph = FactorGraph()
    graph.add_variable(Domain.particle(2))
    with pytest.raises(OracleInfeasibleError):
        brute_force_marginals(graph)
    big = FactorGraph()
    for _ in range(8):
        big.add_variable(Domain.discrete(10))
    with pytest.raises(OracleInfeasibleError):
        log_partition(big)


def test_forest_detection(tree_graph, loop_graph):
    assert tree_graph.is_forest()
    assert not loop_graph.is_forest()
    graph = FactorGraph()
    for _ in range(4):
        graph.add_variable(Domain.discrete(2))
    graph.add_edge(0, 1, table_pairwise(np.zeros((2, 2))))
    assert graph.is_forest()
    assert len(graph.components()) == 3
