import os

import numpy as np
import pandas as pd

from ablations.utils import AbstractCaseStudy, header_report, html_report, plot_curves, plot_heatmap, summary_to_csv
from pbpvision.motion.pipeline import FrameQuad, alternate
from pbpvision.motion.velocity import MotionParams
from pbpvision.synthetic.motion_scenes import render_motion_scene


class MotionTrendStudy(AbstractCaseStudy):
    name = "motion_trend"

    def __init__(self, run_name, seed=42, n_scenes=3, iters=3) -> None:
        super().__init__(run_name=run_name, seed=seed)
        self.n_scenes = n_scenes
        self.iters = iters

    def measure(self) -> pd.DataFrame:
        rows = []
        self.velocity_maps = []
        for k in range(self.n_scenes):
            scene = render_motion_scene(rng=self.rng.child(1, k))
            params = MotionParams()
            result = alternate(
                FrameQuad.from_scene(scene),
                scene.segmentation,
                motion_params=params,
                iters=self.iters,
                rng=self.rng.child(0, k),
                epipole=scene.epipole,
            )
            velocity_error = np.abs(result.velocities.values - scene.velocities)
            self.velocity_maps.append(result.velocities.per_pixel(scene.segmentation))
            for it, error in enumerate(result.error_history):
                rows.append(
                    {
                        "scene": k,
                        "iteration": it,
                        "fourth_view_error": error,
                        "velocity_within_step": float(np.mean(velocity_error <= params.step + 1e-12)),
                    }
                )
        return pd.DataFrame(rows)

    def run(self):
        print(f"Running {self.name}")
        data = self.measure()
        first = data[data["iteration"] == 0].set_index("scene")["fourth_view_error"]
        last = data[data["iteration"] == self.iters].set_index("scene")["fourth_view_error"]
        summary = {
            "mean_first": float(first.mean()),
            "mean_last": float(last.mean()),
            "mean_drop": float(1.0 - (last / first).mean()),
            "non_increasing": bool(
                data.groupby("scene")["fourth_view_error"].apply(lambda errors: errors.is_monotonic_decreasing).all()
            ),
            "velocity_within_step": float(data["velocity_within_step"].mean()),
        }

        os.makedirs(self.base_path, exist_ok=True)
        html_report(
            [
                header_report(self.run_name, summary).to_html(full_html=False, include_plotlyjs=False),
                plot_curves(
                    data, "iteration", "fourth_view_error", "scene", "Fourth view error per alternation"
                ).to_html(full_html=False, include_plotlyjs=False),
                plot_heatmap(self.velocity_maps[0], "Velocity of the first scene").to_html(
                    full_html=False, include_plotlyjs=False
                ),
            ],
            f"{self.base_path}/{self.name}",
        )
        data.to_csv(f"{self.base_path}/{self.name}_dump.csv", index=False)
        summary_to_csv(self.run_name, self.name, summary, f"{self.base_path}/{self.name}")
        return summary
