import os

import numpy as np
import pandas as pd

from ablations.utils import AbstractCaseStudy, header_report, html_report, plot_curves, summary_to_csv
from pbpvision.imaging.hog import global_histogram, orientation_ratio, tilt_from_ratio
from pbpvision.synthetic.textures import random_segment_texture


class HogTiltStudy(AbstractCaseStudy):
    name = "hog_tilt"

    def __init__(self, run_name, seed=42, tilts=(0, 30, 45, 60), n_seeds=4, shape=(256, 256)) -> None:
        super().__init__(run_name=run_name, seed=seed)
        self.tilts = tilts
        self.n_seeds = n_seeds
        self.shape = shape

    def measure(self) -> pd.DataFrame:
        rows = []
        for degrees in self.tilts:
            tilt = np.radians(degrees)
            for k in range(self.n_seeds):
                texture = random_segment_texture(self.shape, tilt, rng=self.rng.child(degrees, k))
                ratio = orientation_ratio(global_histogram(texture))
                rows.append(
                    {
                        "tilt_deg": degrees,
                        "seed": k,
                        "ratio": ratio,
                        "expected": float(np.cos(tilt) ** 3),
                        "recovered_deg": float(np.degrees(tilt_from_ratio(ratio))),
                    }
                )
        return pd.DataFrame(rows)

    def run(self):
        print(f"Running {self.name}")
        data = self.measure()
        means = data.groupby("tilt_deg")[["ratio", "expected", "recovered_deg"]].mean().reset_index()
        summary = {"max_ratio_gap": float(np.max(np.abs(means["ratio"] - means["expected"])))}

        os.makedirs(self.base_path, exist_ok=True)
        curves = means.melt(id_vars="tilt_deg", value_vars=["ratio", "expected"], var_name="series")
        html_report(
            [
                header_report(self.run_name, summary).to_html(full_html=False, include_plotlyjs=False),
                plot_curves(curves, "tilt_deg", "value", "series", "H_min / H_max against tilt").to_html(
                    full_html=False, include_plotlyjs=False
                ),
            ],
            f"{self.base_path}/{self.name}",
        )
        data.to_csv(f"{self.base_path}/{self.name}_dump.csv", index=False)
        summary_to_csv(self.run_name, self.name, summary, f"{self.base_path}/{self.name}")
        return summary
