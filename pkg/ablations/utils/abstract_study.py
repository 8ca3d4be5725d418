import os
from abc import ABC, abstractmethod

import pandas as pd

from pbpvision.inference.mcmc import RngStream


class AbstractCaseStudy(ABC):
    name: str

    def __init__(self, run_name: str, seed: int = 42) -> None:
        super().__init__()
        self.run_name = run_name
        self.seed = seed
        self.rng = RngStream(seed)

    @property
    def base_path(self) -> str:
        return os.path.join(
            os.path.dirname(os.path.realpath(__file__)),
            f"../reports/{self.run_name}",
        )

    @abstractmethod
    def measure(self) -> pd.DataFrame:
        """Runs the experiment and returns its raw table"""

    @abstractmethod
    def run(self):
        pass
