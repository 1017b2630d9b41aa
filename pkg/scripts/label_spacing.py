"""Map a measured ensemble rate increase to a label spacing, for each estimator."""

import argparse
import json
from pathlib import Path

from nvrelaxo.inference import infer_label_spacing


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta-gamma", type=float, default=3500.0)
    ap.add_argument("--sd", type=float, default=400.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/label_spacing"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    out = {}
    for est in ("true", "w", "long", "stre"):
        res = infer_label_spacing(args.delta_gamma, args.sd, estimator=est, seed=args.seed,
                                  workers=args.workers)
        out[est] = res.to_json()
        lo, hi = res.spacing_interval
        print(f"{est:>5}: spacing {lo:.2f} to {hi:.2f} nm{' (unbounded)' if res.unbounded else ''}")
    (args.out / "spacing.json").write_text(json.dumps(out, indent=2) + "\n")


if __name__ == "__main__":
    main()
