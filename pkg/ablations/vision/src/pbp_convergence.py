import os

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from ablations.utils import AbstractCaseStudy, header_report, html_report, ols_fit, plot_loglog, summary_to_csv
from pbpvision.inference.graph import brute_force_marginals
from pbpvision.inference.pbp import pbp_belief, pbp_run
from pbpvision.synthetic.graphs import chain_graph


def chain_fixture(rng, n_nodes: int = 3, n_states: int = 5):
    unaries = [rng.normal(size=n_states) for _ in range(n_nodes)]
    pairwise = [rng.normal(size=(n_states, n_states)) for _ in range(n_nodes - 1)]
    return chain_graph(unaries, pairwise)


def belief_error(graph, n_particles: int, rng) -> float:
    """Largest absolute belief error over nodes and labels, particles drawn uniformly"""
    result = pbp_run(graph, n_particles, 0, "sum", rng, message_iters=graph.num_variables)
    exact = brute_force_marginals(graph)
    worst = 0.0
    for s in range(graph.num_variables):
        labels = graph.domains[s].labels
        values = pbp_belief(graph, result.particle_sets, result.messages, s, labels)
        estimate = np.exp(values - logsumexp(values))
        worst = max(worst, float(np.max(np.abs(estimate - exact[s]))))
    return worst


class PbpConvergenceStudy(AbstractCaseStudy):
    name = "pbp_convergence"

    def __init__(self, run_name, seed=42, n_seeds=20, sizes=(25, 50, 100, 200, 400)) -> None:
        super().__init__(run_name=run_name, seed=seed)
        self.n_seeds = n_seeds
        self.sizes = sizes

    def measure(self) -> pd.DataFrame:
        graph = chain_fixture(self.rng.child(0))
        rows = []
        for n in self.sizes:
            for k in range(self.n_seeds):
                rows.append({"n": n, "seed": k, "error": belief_error(graph, n, self.rng.child(1, n, k))})
        return pd.DataFrame(rows)

    def run(self):
        print(f"Running {self.name}")
        data = self.measure()
        means = data.groupby("n")["error"].mean()
        _, slope = ols_fit(np.log(means.index.values), np.log(means.values))
        summary = {
            "error_first": float(means.iloc[0]),
            "error_last": float(means.iloc[-1]),
            "loglog_slope": slope,
        }

        os.makedirs(self.base_path, exist_ok=True)
        html_report(
            [
                header_report(self.run_name, summary).to_html(full_html=False, include_plotlyjs=False),
                plot_loglog(
                    means.reset_index(), "n", "error", "Mean belief error against particle count"
                ).to_html(full_html=False, include_plotlyjs=False),
            ],
            f"{self.base_path}/{self.name}",
        )
        data.to_csv(f"{self.base_path}/{self.name}_dump.csv", index=False)
        summary_to_csv(self.run_name, self.name, summary, f"{self.base_path}/{self.name}")
        return summary
