import numpy as np
import pytest

from pbpvision.errors import ConfigError, ScheduleError
from pbpvision.inference.bp import (
    init_messages,
    map_indices,
    max_product,
    message_update,
    message_update_division,
    node_log_belief,
    sum_product,
)
from pbpvision.inference.graph import (
    Domain,
    FactorGraph,
    assignment_indices,
    brute_force_map,
    brute_force_marginals,
    energy,
    table_unary,
)
from pbpvision.inference.mcmc import RngStream
from pbpvision.inference.oracle import oracle_bench, oracle_check
from pbpvision.synthetic.graphs import bench_graphs, chain_graph


def max_marginal_error(beliefs, exact):
    return max(np.max(np.abs(beliefs.probabilities(s) - exact[s])) for s in range(len(exact)))


def test_tree_schedule_is_exact_on_random_trees():
    for graph in bench_graphs(50, 6, 5, RngStream(5)):
        beliefs = sum_product(graph, "tree")
        assert max_marginal_error(beliefs, brute_force_marginals(graph)) < 1e-10
        bp_map = max_product(graph, "tree")
        assert energy(graph, bp_map) == pytest.approx(energy(graph, brute_force_map(graph)), abs=1e-10)


@pytest.mark.parametrize("schedule", ["synchronous", "sequential"])
def test_iterative_schedules_converge_to_exact_beliefs_on_trees(schedule, tree_graph):
    beliefs = sum_product(tree_graph, schedule, max_iters=200, tol=1e-12)
    assert beliefs.converged
    assert max_marginal_error(beliefs, brute_force_marginals(tree_graph)) < 1e-8


def test_damping_keeps_the_fixed_point(tree_graph):
    beliefs = sum_product(tree_graph, "synchronous", max_iters=500, tol=1e-12, damping=0.5)
    assert max_marginal_error(beliefs, brute_force_marginals(tree_graph)) < 1e-8


def test_map_indices_match_enumeration_on_tree(tree_graph):
    labels = map_indices(tree_graph, "synchronous", max_iters=200, tol=1e-12)
    best = assignment_indices(tree_graph, brute_force_map(tree_graph))
    assert energy(tree_graph, list(labels)) == pytest.approx(energy(tree_graph, list(best)))


def test_loopy_bp_is_close_on_weakly_coupled_cycle(loop_graph):
    beliefs = sum_product(loop_graph, "synchronous", max_iters=500, tol=1e-10)
    assert beliefs.converged
    assert max_marginal_error(beliefs, brute_force_marginals(loop_graph)) < 0.05


def test_division_update_equals_direct_update(tree_graph):
    messages = init_messages(tree_graph)
    for t, s in sorted(messages):
        messages[(t, s)] = message_update(tree_graph, messages, t, s)
    beliefs = [node_log_belief(tree_graph, messages, v) for v in range(tree_graph.num_variables)]
    for t, s in sorted(messages):
        for mode in ("sum", "max"):
            np.testing.assert_allclose(
                message_update_division(tree_graph, beliefs, messages, (t, s), mode),
                message_update(tree_graph, messages, t, s, mode),
                atol=1e-12,
            )


def test_hard_constraints_fall_back_to_direct_update():
    pairwise = np.zeros((3, 3))
    pairwise[0, 0] = -np.inf
    pairwise[1, 2] = -np.inf
    graph = chain_graph(
        [np.array([0.0, 1.0, -1.0]), np.array([0.5, 0.0, 0.0]), np.array([0.0, 0.0, 2.0])],
        [pairwise, pairwise],
    )
    beliefs = sum_product(graph, "synchronous", max_iters=100, tol=1e-12)
    assert max_marginal_error(beliefs, brute_force_marginals(graph)) < 1e-8


def test_graph_without_edges_returns_normalized_unaries():
    graph = FactorGraph()
    graph.add_variable(Domain.discrete(2), table_unary(np.log([1.0, 3.0])))
    beliefs = sum_product(graph)
    np.testing.assert_allclose(beliefs.probabilities(0), [0.25, 0.75])
    assert beliefs.iterations == 0


def test_schedule_and_damping_are_validated(loop_graph):
    with pytest.raises(ScheduleError):
        sum_product(loop_graph, "tree")
    with pytest.raises(ScheduleError):
        sum_product(loop_graph, "random")
    with pytest.raises(ConfigError):
        sum_product(loop_graph, damping=1.0)


def test_oracle_bench_passes_on_bundled_trees():
    frame = oracle_bench(bench_graphs(10, 6, 5, RngStream(42)))
    assert len(frame) == 10
    assert frame["passed"].all()


def test_oracle_check_reports_loopy_disagreement(loop_graph):
    row = oracle_check(loop_graph, "synchronous", max_iters=500, tol=1e-12)
    assert row["nodes"] == 4
    assert row["states"] == 81
    assert not row["passed"]
