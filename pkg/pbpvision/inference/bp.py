"""
Discrete sum-product and max-product belief propagation in log space.

Messages are keyed by the directed edge (t, s) for the message sent from t to s and
hold a normalized log-vector over the labels of s.
"""

import logging
import typing
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ..errors import ConfigError, DivisionUnsafeError, EvaluationError, ScheduleError
from .graph import Assignment, FactorGraph

logger = logging.getLogger(__name__)

SCHEDULES = ["synchronous", "tree", "sequential"]
MODES = ["sum", "max"]

MessageTable = typing.Dict[typing.Tuple[int, int], np.ndarray]


@dataclass
class BeliefTable:
    """
    Normalized log-beliefs, one vector per variable.
    """

    log_beliefs: typing.List[np.ndarray]
    iterations: int = 0
    converged: bool = True
    messages: MessageTable = field(default_factory=dict, repr=False)

    def probabilities(self, s: int) -> np.ndarray:
        return np.exp(self.log_beliefs[s])

    def __len__(self):
        return len(self.log_beliefs)


def normalize_log(log_values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_z = logsumexp(log_values)
    if not np.isfinite(log_z):
        raise EvaluationError("Cannot normalize a vector with no finite entry")
    return log_values - log_z


def init_messages(graph: FactorGraph) -> MessageTable:
    messages = {}
    for s, t in graph.edges:
        messages[(s, t)] = np.full(graph.domains[t].size, -np.log(graph.domains[t].size))
        messages[(t, s)] = np.full(graph.domains[s].size, -np.log(graph.domains[s].size))
    return messages


def pre_message(
    graph: FactorGraph, messages: MessageTable, t: int, exclude: int = None
) -> np.ndarray:
    """Unary of t plus every incoming message except the one coming from `exclude`"""
    pre = graph.unary_table(t).copy()
    for u in graph.neighbors(t):
        if u != exclude:
            pre = pre + messages[(u, t)]
    return pre


def node_log_belief(graph: FactorGraph, messages: MessageTable, t: int) -> np.ndarray:
    """Unnormalized log-belief B_t, the value stored for the division update"""
    return pre_message(graph, messages, t)


def _combine(pre: np.ndarray, table: np.ndarray, mode: str) -> np.ndarray:
    scores = pre[:, None] + table
    with np.errstate(divide="ignore", invalid="ignore"):
        if mode == "sum":
            return logsumexp(scores, axis=0)
        return np.max(scores, axis=0)


def message_update(
    graph: FactorGraph, messages: MessageTable, t: int, s: int, mode: str = "sum"
) -> np.ndarray:
    """
    Direct product form of the message from t to s, normalized to sum to one.
    """
    pre = pre_message(graph, messages, t, exclude=s)
    return normalize_log(_combine(pre, graph.pairwise_table(t, s), mode))


def message_update_division(
    graph: FactorGraph,
    beliefs: typing.Sequence[np.ndarray],
    messages: MessageTable,
    edge: typing.Tuple[int, int],
    mode: str = "sum",
) -> np.ndarray:
    """
    Message from t to s computed from the stored belief of t divided by the
    message s sent to t, instead of re-multiplying every other incoming message.

    Args:
        graph (FactorGraph): the model
        beliefs (sequence of np.ndarray): unnormalized log-belief of every node
        messages (MessageTable): current messages
        edge (tuple): (t, s), the direction of the message

    Return:
        normalized log-message over the labels of s
    """
    t, s = edge
    incoming = messages[(s, t)]
    if not np.all(np.isfinite(incoming)):
        raise DivisionUnsafeError(f"Message {(s, t)} has a zero entry")
    pre = beliefs[t] - incoming
    return normalize_log(_combine(pre, graph.pairwise_table(t, s), mode))


def _change(new: np.ndarray, old: np.ndarray) -> float:
    both_vanish = np.isneginf(new) & np.isneginf(old)
    with np.errstate(invalid="ignore"):
        diff = np.abs(new - old)
    diff[both_vanish] = 0.0
    return float(np.max(diff)) if diff.size else 0.0


def _damp(new: np.ndarray, old: np.ndarray, damping: float) -> np.ndarray:
    if damping == 0.0:
        return new
    return normalize_log((1.0 - damping) * new + damping * old)


def tree_order(graph: FactorGraph) -> typing.List[typing.Tuple[int, int]]:
    """
    Collect-then-distribute message order for a forest, rooted at the smallest
    index of every component.
    """
    order = []
    for component in graph.components():
        parent = {component[0]: None}
        for node in component:
            for other in graph.neighbors(node):
                if other not in parent:
                    parent[other] = node
        for node in reversed(component[1:]):
            order.append((node, parent[node]))
        for node in component[1:]:
            order.append((parent[node], node))
    return order


def run_messages(
    graph: FactorGraph,
    schedule: str = "synchronous",
    max_iters: int = 100,
    tol: float = 1e-5,
    mode: str = "sum",
    damping: float = 0.0,
) -> typing.Tuple[MessageTable, int, bool]:
    """
    Iterates message updates until the largest L∞ change of a normalized
    log-message falls below tol, or max_iters rounds were made.

    Return:
        messages, number of rounds, converged flag
    """
    if schedule not in SCHEDULES:
        raise ScheduleError(f"Unknown schedule {schedule}")
    if mode not in MODES:
        raise ConfigError(f"Unknown BP mode {mode}")
    if not 0.0 <= damping < 1.0:
        raise ConfigError(f"Damping must lie in [0, 1), got {damping}")

    messages = init_messages(graph)
    if not messages:
        return messages, 0, True

    if schedule == "tree":
        if not graph.is_forest():
            raise ScheduleError("The tree schedule needs a graph without cycles")
        for t, s in tree_order(graph):
            messages[(t, s)] = message_update(graph, messages, t, s, mode)
        return messages, 1, True

    keys = sorted(messages)
    for iteration in range(max_iters):
        if schedule == "synchronous":
            beliefs = [
                node_log_belief(graph, messages, v) for v in range(graph.num_variables)
            ]
            new = {}
            for t, s in keys:
                try:
                    update = message_update_division(
                        graph, beliefs, messages, (t, s), mode
                    )
                except DivisionUnsafeError:
                    update = message_update(graph, messages, t, s, mode)
                new[(t, s)] = _damp(update, messages[(t, s)], damping)
        else:
            new = dict(messages)
            for t, s in keys:
                update = message_update(graph, new, t, s, mode)
                new[(t, s)] = _damp(update, messages[(t, s)], damping)

        delta = max(_change(new[k], messages[k]) for k in keys)
        messages = new
        if delta < tol:
            return messages, iteration + 1, True

    logger.debug(f"BP stopped after {max_iters} rounds without converging")
    return messages, max_iters, False


def sum_product(
    graph: FactorGraph,
    schedule: str = "synchronous",
    max_iters: int = 100,
    tol: float = 1e-5,
    damping: float = 0.0,
) -> BeliefTable:
    """
    Sum-product BP. Exact on forests with the tree schedule.

    Return:
        BeliefTable of normalized log-beliefs
    """
    messages, iterations, converged = run_messages(
        graph, schedule, max_iters, tol, "sum", damping
    )
    beliefs = [
        normalize_log(node_log_belief(graph, messages, s))
        for s in range(graph.num_variables)
    ]
    return BeliefTable(beliefs, iterations, converged, messages)


def map_indices(
    graph: FactorGraph,
    schedule: str = "synchronous",
    max_iters: int = 100,
    tol: float = 1e-5,
    damping: float = 0.0,
) -> np.ndarray:
    """
    Label indices chosen by max-product BP. On a converged forest the labels are
    decoded by backtracking from each root, which yields an exact MAP even with
    ties in the max-marginals; otherwise every node takes the argmax of its
    max-belief, lowest index first.
    """
    messages, _, converged = run_messages(
        graph, schedule, max_iters, tol, "max", damping
    )
    n = graph.num_variables
    labels = np.zeros(n, dtype=int)
    if converged and graph.is_forest():
        for component in graph.components():
            root = component[0]
            labels[root] = int(np.argmax(node_log_belief(graph, messages, root)))
            decoded = {root}
            for node in component:
                for child in graph.neighbors(node):
                    if child in decoded:
                        continue
                    scores = graph.pairwise_table(node, child)[labels[node], :]
                    scores = scores + pre_message(graph, messages, child, exclude=node)
                    labels[child] = int(np.argmax(scores))
                    decoded.add(child)
        return labels
    for s in range(n):
        labels[s] = int(np.argmax(node_log_belief(graph, messages, s)))
    return labels


def max_product(
    graph: FactorGraph,
    schedule: str = "synchronous",
    max_iters: int = 100,
    tol: float = 1e-5,
    damping: float = 0.0,
) -> Assignment:
    """
    Max-product BP returning an assignment of label values.
    """
    labels = map_indices(graph, schedule, max_iters, tol, damping)
    return {
        s: graph.domains[s].labels[labels[s]].copy()
        for s in range(graph.num_variables)
    }
