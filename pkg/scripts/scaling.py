"""Wall-time sweeps on two-moons: N at fixed k, then k at fixed N.

Writes a TSV of per-stage timings and prints the log-log slopes.

    python scripts/scaling.py --sizes 10000 100000 1000000 --k 50
"""

import argparse
import csv
import sys
import warnings

import numpy as np

from villagenet.data_io import make_two_moons
from villagenet.pipeline import VillageNetParams, fit

STAGES = ["kmeans", "graph", "wlcf", "total"]


def sweep(rows, label, data_for, params_for, values, seed):
    for v in values:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            rep = fit(data_for(v), params_for(v))
        row = {"sweep": label, "value": v, "seed": seed, "m_predicted": rep.m_predicted}
        row.update({f"t_{s}": rep.timings[s] for s in STAGES})
        rows.append(row)
        print(f"{label}={v}: " + " ".join(f"{s}={rep.timings[s]:.3f}s" for s in STAGES), flush=True)


def slope(rows, label):
    pts = [(r["value"], r["t_total"]) for r in rows if r["sweep"] == label]
    if len(pts) < 2:
        return float("nan")
    x, y = np.log(np.array(pts, dtype=float)).T
    return float(np.polyfit(x, y, 1)[0])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10_000, 100_000, 1_000_000])
    ap.add_argument("--k", type=int, default=50, help="villages for the size sweep")
    ap.add_argument("--ks", type=int, nargs="*", default=[25, 50, 100, 200], help="villages for the k sweep")
    ap.add_argument("--k-sweep-n", type=int, default=100_000)
    ap.add_argument("--r", type=int, default=20)
    ap.add_argument("--noise", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="scaling.tsv")
    args = ap.parse_args(argv)

    rows = []
    sweep(rows, "N", lambda n: make_two_moons(n, args.noise, args.seed),
          lambda n: VillageNetParams(k=args.k, r=args.r, seed=args.seed), args.sizes, args.seed)
    if args.ks:
        data = make_two_moons(args.k_sweep_n, args.noise, args.seed)
        sweep(rows, "k", lambda k: data, lambda k: VillageNetParams(k=k, r=args.r, seed=args.seed),
              args.ks, args.seed)

    with open(args.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), delimiter="\t", lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    print(f"slope vs N: {slope(rows, 'N'):.3f}")
    if args.ks:
        print(f"slope vs k: {slope(rows, 'k'):.3f}")
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
