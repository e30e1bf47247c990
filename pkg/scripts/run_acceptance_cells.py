"""Compute (or load) every full-length run the acceptance checks read.

    python3 scripts/run_acceptance_cells.py [--cache results/acceptance]

Cells already in the cache for the current code are skipped.
"""

import argparse
import logging

import numpy as np

from edrbo.experiments import ACCEPTANCE_CELLS, cell_config, load_or_run


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cache", default="results/acceptance")
    ap.add_argument("--only", help="comma list of problem:method cells")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cells = ACCEPTANCE_CELLS
    if args.only:
        wanted = {tuple(c.split(":")) for c in args.only.split(",")}
        cells = [c for c in cells if c in wanted]
    for problem, method in cells:
        runs, seconds = load_or_run(cell_config(problem, method), args.cache)
        final = np.array([r.final_regret for r in runs])
        print(f"{problem:22s} {method:6s} {seconds:8.1f}s  R_T {final.mean():.4f} +/- {final.std():.4f}", flush=True)


if __name__ == "__main__":
    main()
