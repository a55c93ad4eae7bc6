"""Full 3^14-candidate sweep at (12,6)/(8,8) with checkpointing.

Long-running (close to an hour per core count unit); safe to interrupt and
rerun, it resumes from the checkpoint.

    python scripts/full_sweep.py --gamma 0.0 --workers 8 --out out/full_g0
"""

import argparse
import json
import logging
import os
import time

from upa_codebook.array import UpaConfig
from upa_codebook.codebook import Sweep, design_codebook
from upa_codebook.ideal import CodebookConfig
from upa_codebook.storage import write_codebook


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gamma", type=float, default=0.0)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--sweep", default="full", help="full, strided(k) or explicit(...)")
    ap.add_argument("--out", default="out/full_sweep")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    os.makedirs(args.out, exist_ok=True)
    upa = UpaConfig(12, 6, n_rf=4, b_phase=6)
    cfg = CodebookConfig(8, 8, gamma=args.gamma, l_h=8, l_v=8, i_phases=3)
    t0 = time.perf_counter()
    cb = design_codebook(upa, cfg, Sweep.parse(args.sweep), workers=args.workers,
                         checkpoint=os.path.join(args.out, "checkpoint.json"))
    write_codebook(cb, os.path.join(args.out, "codebook.json"))
    stats = dict(cb.stats, gamma=args.gamma, sweep=args.sweep,
                 total_time_s=time.perf_counter() - t0)
    with open(os.path.join(args.out, "build_stats.json"), "w") as fh:
        json.dump(stats, fh, indent=1)
    print(json.dumps(stats, indent=1))


if __name__ == "__main__":
    main()
