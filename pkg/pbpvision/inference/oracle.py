import logging
import typing

import numpy as np
import pandas as pd

from .bp import max_product, sum_product
from .graph import FactorGraph, brute_force_map, brute_force_marginals, energy

logger = logging.getLogger(__name__)

BENCH_COLUMNS = ["graph", "nodes", "states", "marginal_err", "map_gap", "iterations", "passed"]


def oracle_check(
    graph: FactorGraph, schedule: str = "tree", max_iters: int = 100, tol: float = 1e-10
) -> dict:
    """
    Compares BP beliefs with enumerated marginals and the max-product assignment
    with the enumerated MAP. MAP agreement is judged on energy so that ties pass.
    """
    beliefs = sum_product(graph, schedule, max_iters, tol=1e-14)
    exact = brute_force_marginals(graph)
    marginal_err = max(
        (float(np.max(np.abs(beliefs.probabilities(s) - exact[s]))) for s in range(graph.num_variables)),
        default=0.0,
    )
    map_gap = energy(graph, max_product(graph, schedule, max_iters, tol=1e-14)) - energy(
        graph, brute_force_map(graph)
    )
    states = int(np.prod([graph.domains[s].size for s in range(graph.num_variables)]))
    return {
        "nodes": graph.num_variables,
        "states": states,
        "marginal_err": marginal_err,
        "map_gap": float(map_gap),
        "iterations": beliefs.iterations,
        "passed": bool(marginal_err <= tol and abs(map_gap) <= tol),
    }


def oracle_bench(
    graphs: typing.Sequence[FactorGraph], schedule: str = "tree", max_iters: int = 100, tol: float = 1e-10
) -> pd.DataFrame:
    rows = []
    for g, graph in enumerate(graphs):
        row = oracle_check(graph, schedule, max_iters, tol)
        row["graph"] = g
        rows.append(row)
    frame = pd.DataFrame(rows, columns=BENCH_COLUMNS)
    failed = int((~frame["passed"]).sum())
    if failed:
        logger.warning(f"{failed} of {len(frame)} graphs disagree with the oracle")
    else:
        logger.info(f"All {len(frame)} graphs agree with the oracle")
    return frame
