import os

import pandas as pd

from ablations.utils import AbstractCaseStudy, header_report, html_report, plot_curves, plot_errors_by_method, summary_to_csv
from pbpvision.sfm.benchmark import run_comparison


class SfmComparisonStudy(AbstractCaseStudy):
    """PBP posterior means against the least-squares mode, plus a noise sweep"""

    name = "sfm_comparison"

    def __init__(self, run_name, seed=42, n_runs=200, sigmas=(1.0, 0.3, 0.1, 0.01), sweep_runs=20, threads=1) -> None:
        super().__init__(run_name=run_name, seed=seed)
        self.n_runs = n_runs
        self.sigmas = sigmas
        self.sweep_runs = sweep_runs
        self.threads = threads

    def measure(self) -> pd.DataFrame:
        return run_comparison(n_runs=self.n_runs, rng=self.rng.child(0), threads=self.threads)

    def sweep(self) -> pd.DataFrame:
        frames = []
        for k, sigma in enumerate(self.sigmas):
            frame = run_comparison(n_runs=self.sweep_runs, sigma=sigma, rng=self.rng.child(1, k), threads=self.threads)
            frame["sigma"] = sigma
            frames.append(frame)
        return pd.concat(frames, ignore_index=True)

    def run(self):
        print(f"Running {self.name}")
        data = self.measure()
        means = data.groupby("method")[["pose_err", "map_err"]].mean()
        sweep = self.sweep()
        sweep_means = sweep.groupby(["sigma", "method"])["map_err"].mean().reset_index()
        summary = {
            "pbp_map_err": float(means.loc["pbp", "map_err"]),
            "mode_map_err": float(means.loc["mode", "map_err"]),
            "map_ratio": float(means.loc["pbp", "map_err"] / means.loc["mode", "map_err"]),
            "pose_ratio": float(means.loc["pbp", "pose_err"] / means.loc["mode", "pose_err"]),
        }

        os.makedirs(self.base_path, exist_ok=True)
        html_report(
            [
                header_report(self.run_name, summary).to_html(full_html=False, include_plotlyjs=False),
                plot_errors_by_method(data, "map_err", "Map error per run").to_html(
                    full_html=False, include_plotlyjs=False
                ),
                plot_errors_by_method(data, "pose_err", "Pose error per run").to_html(
                    full_html=False, include_plotlyjs=False
                ),
                plot_curves(sweep_means, "sigma", "map_err", "method", "Map error against noise").to_html(
                    full_html=False, include_plotlyjs=False
                ),
            ],
            f"{self.base_path}/{self.name}",
        )
        data.to_csv(f"{self.base_path}/{self.name}_dump.csv", index=False)
        sweep.to_csv(f"{self.base_path}/{self.name}_sweep.csv", index=False)
        summary_to_csv(self.run_name, self.name, summary, f"{self.base_path}/{self.name}")
        return summary
