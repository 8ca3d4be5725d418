import logging
import typing

import numpy as np
from scipy.special import logsumexp

from ..errors import (
    ConfigError,
    DomainMismatchError,
    EvaluationError,
    OracleInfeasibleError,
    UnnormalizableError,
)

logger = logging.getLogger(__name__)

# Joint state count above which the enumeration oracles refuse to run
ORACLE_MAX_STATES = 10**7

LogPotential = typing.Callable[..., np.ndarray]
Assignment = typing.Dict[int, np.ndarray]


class Domain:
    """
    State space of one variable.

    Attributes:
        kind (str): "finite" for an explicit label list, "particle" for a continuous space represented by samples
        labels (np.ndarray or None): (K, dimension) label values of a finite domain
        dimension (int): length of one value vector
    """

    def __init__(self, kind: str, labels: np.ndarray = None, dimension: int = 1):
        self.kind = kind
        self.labels = labels
        self.dimension = dimension

    @classmethod
    def finite(cls, labels) -> "Domain":
        labels = np.asarray(labels, dtype=float)
        if labels.ndim == 1:
            labels = labels[:, None]
        if labels.ndim != 2 or labels.shape[0] == 0:
            raise ConfigError("A finite domain needs at least one label")
        return cls("finite", labels, labels.shape[1])

    @classmethod
    def discrete(cls, n_labels: int) -> "Domain":
        """Finite domain with the integer labels 0..n_labels-1"""
        return cls.finite(np.arange(n_labels))

    @classmethod
    def particle(cls, dimension: int) -> "Domain":
        if dimension < 1:
            raise ConfigError(f"Particle dimension must be >= 1, got {dimension}")
        return cls("particle", None, dimension)

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def size(self) -> int:
        if not self.is_finite:
            raise OracleInfeasibleError("A particle domain has no finite size")
        return self.labels.shape[0]

    def as_value(self, value) -> np.ndarray:
        value = np.atleast_1d(np.asarray(value, dtype=float))
        if value.shape != (self.dimension,):
            raise DomainMismatchError(
                f"Value of shape {value.shape} does not fit a domain of dimension {self.dimension}"
            )
        return value

    def index_of(self, value) -> int:
        value = self.as_value(value)
        matches = np.flatnonzero(np.all(self.labels == value, axis=1))
        if len(matches) == 0:
            raise DomainMismatchError(f"{value} is not a label of this domain")
        return int(matches[0])


def table_unary(log_values) -> LogPotential:
    """
    Unary log-potential looked up in a table; the domain labels must be 0..K-1.
    """
    table = np.asarray(log_values, dtype=float)

    def potential(x):
        return table[np.rint(np.asarray(x)[..., 0]).astype(int)]

    return potential


def table_pairwise(log_table) -> LogPotential:
    """
    Pairwise log-potential looked up in a (K_s, K_t) table; labels must be 0..K-1.
    """
    table = np.asarray(log_table, dtype=float)

    def potential(xs, xt):
        return table[
            np.rint(np.asarray(xs)[..., 0]).astype(int),
            np.rint(np.asarray(xt)[..., 0]).astype(int),
        ]

    return potential


def _check_potential(values: np.ndarray, what: str) -> np.ndarray:
    if np.any(np.isnan(values)) or np.any(values == np.inf):
        raise EvaluationError(f"Non-finite log-potential value in {what}")
    return values


class FactorGraph:
    """
    Pairwise Markov random field with log-space potentials.

    Potentials are vectorized callables: a unary Ψ_s takes values of shape (..., dim)
    and returns log-values of shape (...); a pairwise Ψ_{s,t} takes two broadcastable
    arrays and returns the broadcast shape. Edges are stored once under (min, max).
    Graphs are treated as immutable once inference starts.
    """

    def __init__(self):
        self.domains: typing.List[Domain] = []
        self.unary: typing.Dict[int, LogPotential] = {}
        self.pairwise: typing.Dict[typing.Tuple[int, int], LogPotential] = {}
        self._neighbors: typing.Dict[int, typing.Set[int]] = {}
        self._tables: typing.Dict[tuple, np.ndarray] = {}

    @property
    def num_variables(self) -> int:
        return len(self.domains)

    @property
    def edges(self) -> typing.List[typing.Tuple[int, int]]:
        return sorted(self.pairwise)

    def add_variable(self, domain: Domain, unary: LogPotential = None) -> int:
        index = len(self.domains)
        self.domains.append(domain)
        self._neighbors[index] = set()
        if unary is not None:
            self.unary[index] = unary
        self._tables.clear()
        return index

    def set_unary(self, s: int, unary: LogPotential):
        self._check_variable(s)
        self.unary[s] = unary
        self._tables.clear()

    def add_edge(self, s: int, t: int, potential: LogPotential):
        self._check_variable(s)
        self._check_variable(t)
        if s == t:
            raise ConfigError(f"Self-edge on variable {s}")
        if s > t:
            s, t = t, s
            original = potential

            def potential(xs, xt, original=original):
                return original(xt, xs)

        if (s, t) in self.pairwise:
            raise ConfigError(f"Edge {(s, t)} added twice")
        self.pairwise[(s, t)] = potential
        self._neighbors[s].add(t)
        self._neighbors[t].add(s)
        self._tables.clear()

    def neighbors(self, s: int) -> typing.List[int]:
        return sorted(self._neighbors[s])

    def unary_log(self, s: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if s not in self.unary:
            return np.zeros(x.shape[:-1])
        return np.asarray(self.unary[s](x), dtype=float)

    def pairwise_log(self, s: int, t: int, xs, xt) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        xt = np.asarray(xt, dtype=float)
        if (s, t) in self.pairwise:
            return np.asarray(self.pairwise[(s, t)](xs, xt), dtype=float)
        return np.asarray(self.pairwise[(t, s)](xt, xs), dtype=float)

    def unary_table(self, s: int) -> np.ndarray:
        """Log-potential of every label of a finite variable, shape (K,)"""
        key = ("u", s)
        if key not in self._tables:
            labels = self.domains[s].labels
            values = np.broadcast_to(self.unary_log(s, labels), (labels.shape[0],))
            self._tables[key] = _check_potential(
                np.array(values, dtype=float), f"unary {s}"
            )
        return self._tables[key]

    def pairwise_table(self, s: int, t: int) -> np.ndarray:
        """Log-potential table oriented as (K_s, K_t)"""
        if s > t:
            return self.pairwise_table(t, s).T
        key = ("p", s, t)
        if key not in self._tables:
            ls = self.domains[s].labels
            lt = self.domains[t].labels
            values = self.pairwise_log(s, t, ls[:, None, :], lt[None, :, :])
            values = np.broadcast_to(values, (ls.shape[0], lt.shape[0]))
            self._tables[key] = _check_potential(
                np.array(values, dtype=float), f"edge {(s, t)}"
            )
        return self._tables[key]

    def components(self) -> typing.List[typing.List[int]]:
        seen = set()
        components = []
        for root in range(self.num_variables):
            if root in seen:
                continue
            order = [root]
            seen.add(root)
            for node in order:
                for other in self.neighbors(node):
                    if other not in seen:
                        seen.add(other)
                        order.append(other)
            components.append(order)
        return components

    def is_forest(self) -> bool:
        return len(self.pairwise) == self.num_variables - len(self.components())

    def _check_variable(self, s: int):
        if not 0 <= s < self.num_variables:
            raise ConfigError(f"Unknown variable {s}")


def assignment_values(graph: FactorGraph, assignment) -> typing.List[np.ndarray]:
    """
    Validates an assignment and returns one value vector per variable.

    Args:
        graph (FactorGraph): the graph the assignment refers to
        assignment (mapping or sequence): value per variable id

    Return:
        list of value vectors in variable order
    """
    if not isinstance(assignment, typing.Mapping):
        assignment = dict(enumerate(assignment))
    values = []
    for s, domain in enumerate(graph.domains):
        if s not in assignment:
            raise DomainMismatchError(f"Assignment has no value for variable {s}")
        value = domain.as_value(assignment[s])
        if domain.is_finite:
            domain.index_of(value)
        values.append(value)
    return values


def assignment_indices(graph: FactorGraph, assignment) -> np.ndarray:
    values = assignment_values(graph, assignment)
    return np.array(
        [domain.index_of(v) for domain, v in zip(graph.domains, values)], dtype=int
    )


def energy(graph: FactorGraph, assignment) -> float:
    """
    Negative log of the unnormalized joint, -Σ log Ψ_s - Σ log Ψ_{s,t}.
    """
    values = assignment_values(graph, assignment)
    total = 0.0
    for s in range(graph.num_variables):
        total -= float(graph.unary_log(s, values[s]))
    for s, t in graph.edges:
        total -= float(graph.pairwise_log(s, t, values[s], values[t]))
    if np.isnan(total):
        raise EvaluationError("Energy evaluated to NaN")
    return total


def joint_log_table(graph: FactorGraph) -> np.ndarray:
    """
    Unnormalized log joint over all label combinations, one axis per variable.
    """
    for s, domain in enumerate(graph.domains):
        if not domain.is_finite:
            raise OracleInfeasibleError(f"Variable {s} has a particle domain")
    sizes = [domain.size for domain in graph.domains]
    states = int(np.prod(sizes, dtype=object)) if sizes else 1
    if states > ORACLE_MAX_STATES:
        raise OracleInfeasibleError(
            f"{states} joint states exceed the oracle limit of {ORACLE_MAX_STATES}"
        )
    n = len(sizes)
    joint = np.zeros(sizes)
    for s in range(n):
        shape = [1] * n
        shape[s] = sizes[s]
        joint = joint + graph.unary_table(s).reshape(shape)
    for s, t in graph.edges:
        shape = [1] * n
        shape[s] = sizes[s]
        shape[t] = sizes[t]
        joint = joint + graph.pairwise_table(s, t).reshape(shape)
    return joint


def log_partition(graph: FactorGraph) -> float:
    joint = joint_log_table(graph)
    log_z = float(logsumexp(joint))
    if not np.isfinite(log_z):
        raise UnnormalizableError("Every joint state has zero probability")
    return log_z


def brute_force_joint(graph: FactorGraph) -> np.ndarray:
    """Normalized joint probability table computed by enumeration"""
    joint = joint_log_table(graph)
    return np.exp(joint - log_partition(graph))


def brute_force_marginals(graph: FactorGraph) -> typing.List[np.ndarray]:
    """
    Exact per-variable marginals by explicit enumeration of the joint.

    Return:
        list with one probability vector per variable
    """
    joint = joint_log_table(graph)
    log_z = float(logsumexp(joint))
    if not np.isfinite(log_z):
        raise UnnormalizableError("Every joint state has zero probability")
    n = graph.num_variables
    marginals = []
    for s in range(n):
        axes = tuple(i for i in range(n) if i != s)
        log_marginal = logsumexp(joint, axis=axes) if axes else joint
        marginals.append(np.exp(log_marginal - log_z))
    return marginals


def brute_force_map(graph: FactorGraph) -> Assignment:
    """
    Minimum-energy assignment by enumeration; ties go to the lexicographically
    smallest label-index tuple.
    """
    joint = joint_log_table(graph)
    if graph.num_variables == 0:
        return {}
    best = np.unravel_index(int(np.argmax(joint)), joint.shape)
    return {
        s: graph.domains[s].labels[best[s]].copy() for s in range(graph.num_variables)
    }
