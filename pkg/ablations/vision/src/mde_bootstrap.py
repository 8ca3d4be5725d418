import os

import numpy as np
import pandas as pd

from ablations.utils import AbstractCaseStudy, header_report, html_report, plot_curves, summary_to_csv
from pbpvision.mde.baseline import ground_plane_baseline, rms_disparity
from pbpvision.mde.corpus import StereoPair
from pbpvision.mde.model import MdeParams, bootstrap_em, monocular_infer
from pbpvision.synthetic.stereo_scenes import render_mono_corpus


class MdeBootstrapStudy(AbstractCaseStudy):
    name = "mde_bootstrap"

    def __init__(self, run_name, seed=42, n_train=10, n_test=4, iters=3, d_max=16) -> None:
        super().__init__(run_name=run_name, seed=seed)
        self.n_train = n_train
        self.n_test = n_test
        self.iters = iters
        self.d_max = d_max

    def measure(self) -> pd.DataFrame:
        train_pairs, w = render_mono_corpus(self.n_train, d_max=self.d_max, rng=self.rng.child(1))
        test_pairs, _ = render_mono_corpus(self.n_test, d_max=self.d_max, rng=self.rng.child(2), w=w)
        corpus = [StereoPair(f"train{n:03d}", *pair) for n, pair in enumerate(train_pairs)]
        params, history = bootstrap_em(corpus, MdeParams(d_max=self.d_max), self.iters)
        self.history = history

        baseline = ground_plane_baseline([d for _, _, d in train_pairs])
        rows = []
        for n, (left, _, disparity) in enumerate(test_pairs):
            rows.append(
                {
                    "pair": n,
                    "mono_rms": rms_disparity(monocular_infer(left, params), disparity),
                    "baseline_rms": rms_disparity(baseline.predict(disparity.shape), disparity),
                }
            )
        return pd.DataFrame(rows)

    def run(self):
        print(f"Running {self.name}")
        data = self.measure()
        summary = {
            "mono_rms": float(data["mono_rms"].mean()),
            "baseline_rms": float(data["baseline_rms"].mean()),
            "objective_monotone": bool(np.all(np.diff(self.history) <= 1e-9)),
        }
        summary["rms_ratio"] = summary["mono_rms"] / summary["baseline_rms"]

        os.makedirs(self.base_path, exist_ok=True)
        objective = pd.DataFrame(
            {"half_step": np.arange(1, len(self.history) + 1), "objective": self.history, "series": "joint energy"}
        )
        html_report(
            [
                header_report(self.run_name, summary).to_html(full_html=False, include_plotlyjs=False),
                plot_curves(objective, "half_step", "objective", "series", "Coordinate descent objective").to_html(
                    full_html=False, include_plotlyjs=False
                ),
            ],
            f"{self.base_path}/{self.name}",
        )
        data.to_csv(f"{self.base_path}/{self.name}_dump.csv", index=False)
        summary_to_csv(self.run_name, self.name, summary, f"{self.base_path}/{self.name}")
        return summary
