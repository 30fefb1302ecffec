"""Regenerate data/sample_panel.csv.

A synthetic 10 x 10 monthly-style panel with 624 periods, written in the
long CSV format the CLI ingests. Deterministic: rerunning this script
reproduces the bundled file byte for byte.
"""

import os

import numpy as np

from matfactor.io import export_csv
from matfactor.simulation import AR1Spec, KroneckerNoise, SimConfig, simulate


def main() -> None:
    config = SimConfig(
        p1=10, p2=10, k1=2, k2=2, T=624,
        delta1=0.0, delta2=0.0,
        factors=AR1Spec(phi=np.array([[-0.5, 0.6], [0.8, -0.4]])),
        noise=KroneckerNoise(),
        seed=20240624,
    )
    series, _ = simulate(config)
    here = os.path.dirname(os.path.abspath(__file__))
    out = os.path.join(here, os.pardir, "data", "sample_panel.csv")
    os.makedirs(os.path.dirname(out), exist_ok=True)
    export_csv(series, out)
    print(f"wrote {os.path.normpath(out)} ({series.T}x{series.p1}x{series.p2})")


if __name__ == "__main__":
    main()
