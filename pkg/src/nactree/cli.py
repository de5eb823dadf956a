"""Command-line interface.

Subcommands: ``estimate``, ``triple-test``, ``sample``, ``simulate``, ``kendall``.
CSV in, JSON or CSV out. Every stochastic command requires ``--seed``.
Exit status: 0 success, 1 runtime error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kendall
from .reconstruct import DEFAULT_ALPHA, estimate_structure
from .sampler import NacModel, make_rng, sample_nac
from .simlab import ExperimentConfig, rows_to_csv, run_experiment
from .tree import tree_to_dict
from .triad import DEFAULT_BOOTSTRAP, triple_test

log = logging.getLogger("nactree")


class DataError(RuntimeError):
    pass


@dataclass(frozen=True)
class Dataset:
    labels: tuple
    data: np.ndarray

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def load_csv(path, cols=None) -> Dataset:
    """Read selected numeric columns from a headed CSV file."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    cols = list(cols) if cols else header
    missing = [c for c in cols if c not in header]
    if missing:
        raise DataError(f"{path}: no column(s) {', '.join(missing)}; header is {', '.join(header)}")
    idx = [header.index(c) for c in cols]
    body = rows[1:]
    if not body:
        raise DataError(f"{path}: header but no data rows")
    out = np.empty((len(body), len(idx)))
    for i, row in enumerate(body):
        line = i + 2
        if len(row) != len(header):
            raise DataError(f"{path}: line {line} has {len(row)} fields, expected {len(header)}")
        for j, k in enumerate(idx):
            cell = row[k].strip()
            if cell == "" or cell.lower() in ("na", "nan", "null"):
                raise DataError(f"{path}: missing value at line {line}, column {cols[j]}")
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric value {cell!r} at line {line}, column {cols[j]}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: non-finite value {cell!r} at line {line}, column {cols[j]}")
            out[i, j] = v
    kendall.warn_ties(out, cols)
    return Dataset(tuple(cols), out)


def _split_cols(text):
    return [c.strip() for c in text.split(",") if c.strip()] if text else None


def _dump(obj, path):
    text = json.dumps(obj, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _write_text(text, path):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# --- commands -----------------------------------------------------------------------


def cmd_estimate(args, parser):
    ds = load_csv(args.input, _split_cols(args.cols))
    if ds.d < 3:
        raise DataError("estimate needs at least three columns")
    if ds.n < 10:
        raise DataError("estimate needs at least ten rows")
    est = estimate_structure(
        ds.data, alpha0=args.alpha, B=args.bootstrap, seed=args.seed, labels=ds.labels, workers=args.workers
    )
    diag = est.to_dict()
    if args.output:
        _dump({"schema": 1, **tree_to_dict(est.tree)}, args.output)
        diag_path = args.diagnostics or str(Path(args.output).with_suffix("")) + ".diagnostics.json"
        _dump(diag, diag_path)
    else:
        _dump(diag, args.diagnostics)
    log.info("estimated %s at alpha=%g", tree_to_dict(est.tree)["text"], est.alpha)


def cmd_triple_test(args, parser):
    cols = _split_cols(args.cols)
    if not cols or len(cols) != 3:
        parser.error("triple-test needs exactly three --cols")
    ds = load_csv(args.input, cols)
    if ds.n < 10:
        raise DataError("triple-test needs at least ten rows")
    dec = triple_test(ds.data, args.bootstrap, make_rng(args.seed), labels=ds.labels)
    _dump({"schema": 1, **dec.to_dict()}, args.output)


def cmd_sample(args, parser):
    model = NacModel.from_dict(json.loads(Path(args.model).read_text()))
    if args.n < 1:
        parser.error("--n must be positive")
    u = sample_nac(model, args.n, make_rng(args.seed))
    lines = [",".join(model.tree.leaves)]
    lines += [",".join(f"{v:.17g}" for v in row) for row in u]
    _write_text("\n".join(lines) + "\n", args.output)


def cmd_simulate(args, parser):
    raw = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        raw["seed"] = args.seed
    if "seed" not in raw:
        parser.error("simulate needs --seed or a 'seed' entry in the config")
    cfg = ExperimentConfig.from_dict(raw)

    def progress(row):
        log.info("n=%d correct=%.3f se=%.3f", row.n, row.correct_fraction, row.se)

    rows = run_experiment(cfg, workers=args.workers, progress=progress)
    _write_text(rows_to_csv(rows), args.out)


def cmd_kendall(args, parser):
    cols = _split_cols(args.cols)
    if not cols or len(cols) not in (2, 3):
        parser.error("kendall needs two or three --cols")
    if args.grid < 2:
        parser.error("--grid needs at least two points")
    ds = load_csv(args.input, cols)
    ks = kendall.pseudo_obs(ds.data)
    grid = np.linspace(0.0, 1.0, args.grid)
    k = kendall.ecdf(ks, grid)
    lines = ["series,x,value"]
    lines += [f"pseudo_obs,{m + 1},{v:.17g}" for m, v in enumerate(ks.sorted)]
    lines += [f"ecdf,{g:.17g},{v:.17g}" for g, v in zip(grid, k)]
    _write_text("\n".join(lines) + "\n", args.output)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nactree", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="estimate the tree structure of a CSV data set")
    e.add_argument("--input", required=True)
    e.add_argument("--cols", help="comma-separated columns (default: all)")
    e.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    e.add_argument("--bootstrap", type=int, default=DEFAULT_BOOTSTRAP)
    e.add_argument("--seed", type=int, required=True)
    e.add_argument("--output", help="tree JSON path (default: everything to stdout)")
    e.add_argument("--diagnostics", help="diagnostics JSON path")
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_estimate)

    t = sub.add_parser("triple-test", help="bootstrap test on three columns")
    t.add_argument("--input", required=True)
    t.add_argument("--cols", required=True)
    t.add_argument("--bootstrap", type=int, default=DEFAULT_BOOTSTRAP)
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--output")
    t.set_defaults(func=cmd_triple_test)

    s = sub.add_parser("sample", help="sample a nested Archimedean copula")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--output")
    s.set_defaults(func=cmd_sample)

    m = sub.add_parser("simulate", help="percentage-of-correct-estimates experiment")
    m.add_argument("--config", required=True)
    m.add_argument("--out")
    m.add_argument("--seed", type=int, help="overrides the config seed")
    m.add_argument("--workers", type=int, default=1)
    m.set_defaults(func=cmd_simulate)

    k = sub.add_parser("kendall", help="pseudo-observations and empirical Kendall CDF")
    k.add_argument("--input", required=True)
    k.add_argument("--cols", required=True)
    k.add_argument("--grid", type=int, default=101)
    k.add_argument("--output")
    k.set_defaults(func=cmd_kendall)
    return p


def run(argv=None) -> int:
    """Dispatch a command line; returns the exit status instead of exiting."""
    try:
        return _run(argv)
    except SystemExit as exc:  # argparse usage errors and --help
        return exc.code if isinstance(exc.code, int) else 2


def _run(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    for name in ("bootstrap", "workers"):
        if getattr(args, name, 1) < 1:
            parser.error(f"--{name} must be >= 1")
    if hasattr(args, "alpha") and not 0.0 <= args.alpha <= 1.0:
        parser.error("--alpha must lie in [0, 1]")
    try:
        args.func(args, parser)
    except KeyError as exc:
        print(f"nactree {args.command}: error: missing key {exc}", file=sys.stderr)
        return 1
    except (DataError, ValueError, OSError, RuntimeError) as exc:
        print(f"nactree {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
