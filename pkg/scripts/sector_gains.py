"""Mean reference gain of the four 64-beam codebooks for a 12x6 array.

Writes one pattern CSV per codebook (for heatmaps) and a summary table:

    python scripts/sector_gains.py --stride 729 --out out/sector_gains
"""

import argparse
import csv
import logging
import os

from upa_codebook.array import UpaConfig
from upa_codebook.codebook import (
    Sweep,
    baseline_allones,
    baseline_kp_dft,
    design_codebook,
    pattern_report,
)
from upa_codebook.ideal import CodebookConfig
from upa_codebook.storage import write_codebook


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--stride", type=int, default=729, help="1 runs the full sweep")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--grid-res", type=int, default=200)
    ap.add_argument("--out", default="out/sector_gains")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    os.makedirs(args.out, exist_ok=True)

    upa = UpaConfig(12, 6, n_rf=4, b_phase=6)
    sweep = Sweep.full() if args.stride == 1 else Sweep.strided(args.stride)
    books = {
        "proposed": design_codebook(upa, CodebookConfig(8, 8), sweep, workers=args.workers),
        "guard_band": design_codebook(upa, CodebookConfig(8, 8, gamma=0.075), sweep,
                                      workers=args.workers, kind="guard_band"),
        "allones": baseline_allones(upa, 8, 8, args.workers),
        "kp_dft": baseline_kp_dft(upa, 8, 8),
    }
    with open(os.path.join(args.out, "summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["codebook", "mean_gain", "min_gain", "mean_gain_physical",
                         "min_gain_physical", "candidates_evaluated"])
        for name, cb in books.items():
            write_codebook(cb, os.path.join(args.out, f"{name}.json"))
            with open(os.path.join(args.out, f"{name}_pattern.csv"), "w") as pf:
                pattern_report(cb, args.grid_res).to_csv(pf)
            s = cb.stats
            writer.writerow([name, repr(s["mean_gain"]), repr(s["min_gain"]),
                             repr(s["mean_gain_physical"]), repr(s["min_gain_physical"]),
                             s.get("candidates_evaluated", 0)])
            print(f"{name:>10}: mean gain {s['mean_gain']:.4f} "
                  f"(physical grid {s['mean_gain_physical']:.4f}), min {s['min_gain']:.4f}")


if __name__ == "__main__":
    main()
