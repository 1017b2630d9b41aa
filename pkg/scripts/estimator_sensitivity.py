"""Response of each ensemble rate estimator to the label-plane density."""

import argparse
import json
from pathlib import Path

import numpy as np

from nvrelaxo.inference import EnsembleConfig, sensitivity_compare, spacing_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--plane-height", type=float, default=2.0)
    ap.add_argument("--noise-sd", type=float, default=0.0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/estimator_sensitivity"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    cfg = EnsembleConfig(plane_height=args.plane_height, noise_sd=args.noise_sd)
    table = sensitivity_compare(np.concatenate([[0.0], spacing_grid()]), cfg, seed=args.seed,
                                workers=args.workers)
    (args.out / "sensitivity.csv").write_text(table.to_csv())
    (args.out / "sensitivity.json").write_text(json.dumps(table.to_json(), indent=2) + "\n")
    print("slopes", table.slopes)
    print("ratios", table.ratios())


if __name__ == "__main__":
    main()
