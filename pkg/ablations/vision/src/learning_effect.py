import os

import pandas as pd

from ablations.utils import AbstractCaseStudy, header_report, html_report, plot_curves, summary_to_csv
from pbpvision.learning.hard_em import TrainConfig, train
from pbpvision.learning.params import initial_params
from pbpvision.mde.corpus import StereoPair
from pbpvision.stereo.inference import PlaneInferenceConfig
from pbpvision.synthetic.stereo_scenes import render_textured_corpus


class LearningEffectStudy(AbstractCaseStudy):
    """Hard EM with and without the texture term on rendered textured-plane pairs"""

    name = "learning_effect"

    def __init__(self, run_name, seed=42, n_pairs=10, n_holdout=4, iters=6, rounds=4) -> None:
        super().__init__(run_name=run_name, seed=seed)
        self.n_pairs = n_pairs
        self.n_holdout = n_holdout
        self.iters = iters
        self.rounds = rounds

    def corpus(self, n_pairs, stream):
        scenes = render_textured_corpus(n_pairs, rng=self.rng.child(stream))
        return [StereoPair.from_scene(f"pair{stream}_{n:03d}", scene) for n, scene in enumerate(scenes)]

    def measure(self) -> pd.DataFrame:
        corpus = self.corpus(self.n_pairs, 1)
        holdout = self.corpus(self.n_holdout, 2)
        logs = []
        for texture in (True, False):
            config = TrainConfig(
                iters=self.iters, texture=texture, inference=PlaneInferenceConfig(rounds=self.rounds)
            )
            _, _, log = train(corpus, initial_params(texture), config, self.rng.child(0), holdout)
            log["texture"] = texture
            logs.append(log)
        return pd.concat(logs, ignore_index=True)

    def run(self):
        print(f"Running {self.name}")
        data = self.measure()
        first = data[data["iter"] == 1].set_index("texture")["holdout_distortion"]
        last = data[data["iter"] == data["iter"].max()].set_index("texture")["holdout_distortion"]
        summary = {
            "texture_first": float(first[True]),
            "texture_last": float(last[True]),
            "notexture_last": float(last[False]),
            "texture_ratio": float(last[True] / first[True]),
        }

        os.makedirs(self.base_path, exist_ok=True)
        html_report(
            [
                header_report(self.run_name, summary).to_html(full_html=False, include_plotlyjs=False),
                plot_curves(
                    data, "iter", "holdout_distortion", "texture", "Held-out view prediction distortion"
                ).to_html(full_html=False, include_plotlyjs=False),
                plot_curves(data, "iter", "mean_energy", "texture", "Mean training energy").to_html(
                    full_html=False, include_plotlyjs=False
                ),
            ],
            f"{self.base_path}/{self.name}",
        )
        data.to_csv(f"{self.base_path}/{self.name}_dump.csv", index=False)
        summary_to_csv(self.run_name, self.name, summary, f"{self.base_path}/{self.name}")
        return summary
