"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Output files are
written to temporaries and renamed into place only after every output of
a command has been produced, so a failed run leaves nothing behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import logging
import os
import sys
import tempfile
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import data_io, pipeline, wlcf

log = logging.getLogger("villagenet")

BENCH_COLUMNS = [
    "k", "r", "seed", "m_predicted", "nmi", "nmi_geometric", "ari",
    "t_kmeans", "t_graph", "t_wlcf", "t_total", "status",
]


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _commit(outputs: Dict[Path, str]) -> None:
    """Write every output to a temporary sibling, then rename all into place."""
    staged = []
    try:
        for path, text in outputs.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _sniff_header(path: Path, delimiter: str) -> bool:
    with path.open(newline="") as fh:
        for row in csv.reader(fh, delimiter=delimiter):
            if row:
                try:
                    [float(v) for v in row]
                    return False
                except ValueError:
                    return True
    return False


def _load(path: str, labels: Optional[str], header: Optional[bool], delimiter: str) -> data_io.DataMatrix:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    has_header = _sniff_header(p, delimiter) if header is None else header
    return data_io.load_csv(p, label_column=labels, has_header=has_header, delimiter=delimiter)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_report(report: pipeline.ClusteringReport) -> str:
    lines = [f"{key}: {_fmt(value)}" for key, value in report.as_dict().items()]
    sizes = np.bincount(report.final_labels.assignment, minlength=report.m_predicted)
    lines.append("cluster_sizes: " + " ".join(str(int(s)) for s in sizes))
    return "\n".join(lines) + "\n"


def format_labels(labels: np.ndarray, header=("index", "cluster")) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(enumerate(int(v) for v in labels))
    return buf.getvalue()


def _params(args, k: int, r: int, seed: int) -> pipeline.VillageNetParams:
    return pipeline.VillageNetParams(
        k=k,
        r=r,
        seed=seed,
        restarts=args.restarts,
        walk_length=args.walk_length,
        size_penalty=args.size_penalty,
        standardize=args.standardize,
    )


def cmd_cluster(args) -> int:
    data = _load(args.input, args.labels, args.header, args.delimiter)
    if args.k > data.n_rows:
        raise UsageError(f"--k {args.k} exceeds the number of rows ({data.n_rows})")
    report = pipeline.fit(data, _params(args, args.k, args.r, args.seed), threads=args.threads)
    out = Path(args.out)
    outputs = {out: format_labels(report.final_labels.assignment)}
    report_path = Path(args.report) if args.report else out.with_name(out.stem + ".report.txt")
    outputs[report_path] = format_report(report)
    if args.emit_graph:
        buf = io.StringIO()
        for u, v, w in report.graph.edges():
            buf.write(f"{u} {v} {w}\n")
        outputs[Path(args.emit_graph)] = buf.getvalue()
    _commit(outputs)
    summary = f"m_predicted={report.m_predicted} total_time={report.timings['total']:.3f}s"
    if report.metrics:
        summary += f" nmi={report.metrics['nmi']:.4f} ari={report.metrics['ari']:.4f}"
    print(summary)
    return 0


def _bench_data(args) -> data_io.DataMatrix:
    if args.moons is not None:
        if args.moons < 2:
            raise UsageError("--moons needs at least 2 points")
        return data_io.make_two_moons(args.moons, args.noise, args.data_seed)
    if args.input is None:
        raise UsageError("give an input CSV or --moons N")
    return _load(args.input, args.labels, args.header, args.delimiter)


def run_bench(args) -> List[dict]:
    data = _bench_data(args)
    rows = []
    for k, r, seed in itertools.product(args.k, args.r, args.seeds):
        row = {"k": k, "r": r, "seed": seed}
        try:
            rep = pipeline.fit(data, _params(args, k, r, seed), threads=args.threads)
        except Exception as exc:  # one bad grid point must not stop the sweep
            log.warning("run k=%s r=%s seed=%s failed: %s", k, r, seed, exc)
            row["status"] = f"error: {exc}".replace("\t", " ").replace("\n", " ")
            rows.append(row)
            continue
        row["m_predicted"] = rep.m_predicted
        if rep.metrics:
            row.update(rep.metrics)
        for stage in ("kmeans", "graph", "wlcf", "total"):
            row[f"t_{stage}"] = rep.timings[stage]
        row["status"] = "ok"
        rows.append(row)
    return rows


def _medians(rows: List[dict]) -> List[dict]:
    out = []
    keys = sorted({(row["k"], row["r"]) for row in rows})
    for k, r in keys:
        group = [row for row in rows if (row["k"], row["r"]) == (k, r) and row["status"] == "ok"]
        med = {"k": k, "r": r, "seed": "median", "status": f"{len(group)} ok"}
        for col in BENCH_COLUMNS[3:-1]:
            vals = [row[col] for row in group if col in row]
            if vals:
                med[col] = float(np.median(vals))
        out.append(med)
    return out


def format_bench(rows: List[dict]) -> str:
    def cell(row, col):
        v = row.get(col, "")
        return f"{v:.6g}" if isinstance(v, float) else str(v)

    lines = ["\t".join(BENCH_COLUMNS)]
    for row in rows + _medians(rows):
        lines.append("\t".join(cell(row, c) for c in BENCH_COLUMNS))
    return "\n".join(lines) + "\n"


def cmd_bench(args) -> int:
    if not args.k or not args.r or not args.seeds:
        raise UsageError("bench needs a non-empty grid: --k, --r and --seeds")
    rows = run_bench(args)
    text = format_bench(rows)
    if args.out:
        _commit({Path(args.out): text})
    sys.stdout.write(text)
    return 0 if any(row["status"] == "ok" for row in rows) else 1


def cmd_synth(args) -> int:
    if args.n < 2:
        raise UsageError(f"--n must be >= 2, got {args.n}")
    if not args.noise >= 0:
        raise UsageError(f"--noise must be >= 0, got {args.noise}")
    data = data_io.make_two_moons(args.n, args.noise, args.seed)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.header:
        w.writerow(["x", "y", "label"])
    for (x, y), lab in zip(data.values, data.labels):
        w.writerow([repr(float(x)), repr(float(y)), int(lab)])
    _commit({Path(args.out): buf.getvalue()})
    return 0


def _has_content(path: Path) -> bool:
    with path.open() as fh:
        return any(line.split("#", 1)[0].strip() for line in fh)


def cmd_communities(args) -> int:
    path = Path(args.edges)
    if not path.is_file():
        raise UsageError(f"no such file: {args.edges}")
    if not _has_content(path):
        raise UsageError(f"{args.edges}: empty edge list")
    graph = wlcf.read_edge_list(path)
    params = wlcf.WLCFParams(walk_length=args.walk_length, size_penalty=args.size_penalty)
    state = wlcf.wlcf_run(graph, args.seed, params)
    _commit({Path(args.out): format_labels(state.partition.assignment, ("node", "community"))})
    print(f"m={state.m}")
    return 0


def _add_data_args(p):
    p.add_argument("--labels", help="ground-truth column (name or 0-based index); used only for scoring")
    p.add_argument("--header", action="store_true", default=None, help="first row is a header (default: sniff)")
    p.add_argument("--delimiter", default=",")


def _add_model_args(p):
    p.add_argument("--restarts", type=_positive_int, default=1, help="K-Means restarts, best WCSS kept")
    p.add_argument("--walk-length", type=_positive_int, default=4)
    p.add_argument("--size-penalty", type=float, default=10.0)
    p.add_argument("--standardize", action="store_true", help="z-score every feature column first")
    p.add_argument("--threads", type=_positive_int, default=None, help="cap on worker threads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="villagenet", description="Village-Net clustering")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="cluster a CSV file")
    p.add_argument("input")
    p.add_argument("--k", type=_positive_int, default=20, help="number of villages")
    p.add_argument("--r", type=_positive_int, default=20, help="exterior size per village")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="label CSV (index,cluster)")
    p.add_argument("--report", help="report path (default: <out>.report.txt)")
    p.add_argument("--emit-graph", help="write the village network as a 'U V w' edge list")
    _add_data_args(p)
    _add_model_args(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("bench", help="run a (k, r) x seed grid and tabulate metrics and timings")
    p.add_argument("input", nargs="?")
    p.add_argument("--moons", type=int, help="use a generated two-moons set of this size")
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--k", type=_positive_int, nargs="+", default=[20])
    p.add_argument("--r", type=_positive_int, nargs="+", default=[20])
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--out", help="also write the table here (TSV)")
    _add_data_args(p)
    _add_model_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="generate a labelled two-moons CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--header", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("communities", help="run community detection on a 'U V w' edge list")
    p.add_argument("edges")
    p.add_argument("--out", required=True, help="node,community CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--walk-length", type=_positive_int, default=4)
    p.add_argument("--size-penalty", type=float, default=10.0)
    p.set_defaults(func=cmd_communities)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"villagenet {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"villagenet {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
