"""Print a regret table for a results directory and optionally draw the SVG.

    python3 scripts/summarise_results.py results/acceptance --svg results/regret.svg
"""

import argparse

import numpy as np

from edrbo.report import load_dir, render_svg, summarise


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("directory")
    ap.add_argument("--svg")
    args = ap.parse_args()
    runs = load_dir(args.directory)
    if not runs:
        raise SystemExit(f"no runs under {args.directory}")
    print(f"{'problem':22s} {'method':6s} {'n':>3s} {'R_T mean':>10s} {'std':>8s} {'R_T/T 50->T':>14s}")
    for (p, m), (mean, std, n) in sorted(summarise(runs).items()):
        cell = [r for r in runs if (r.problem, r.method) == (p, m)]
        T = min(len(r.R) for r in cell)
        ratio = np.mean([r.R[T - 1] / T < r.R[49] / 50 for r in cell]) if T > 50 else float("nan")
        print(f"{p:22s} {m:6s} {n:3d} {mean:10.3f} {std:8.3f} {ratio:14.2f}")
    if args.svg:
        print("wrote", render_svg(runs, args.svg))


if __name__ == "__main__":
    main()
