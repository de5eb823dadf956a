"""Percentage-of-correct-estimates experiments.

For each sample size, ``replications`` samples are drawn from a nested
Archimedean model, the structure is estimated, and the fraction of exact
recoveries is reported with its binomial standard error.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from .reconstruct import DEFAULT_ALPHA, estimate_structure
from .sampler import NacModel, make_rng, sample_nac, seed_sequence
from .triad import DEFAULT_BOOTSTRAP

DEFAULT_SAMPLE_SIZES = (50, 100, 200, 500)
DEFAULT_REPLICATIONS = 100


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    model: NacModel
    sample_sizes: tuple = DEFAULT_SAMPLE_SIZES
    replications: int = DEFAULT_REPLICATIONS
    alpha: float = DEFAULT_ALPHA
    bootstrap: int = DEFAULT_BOOTSTRAP
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.model.d < 3:
            raise ValueError("experiments need at least three variables")
        if any(n < 10 for n in self.sample_sizes):
            raise ValueError("sample sizes must be >= 10")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        """Config JSON: ``{"model": {"tree": ..., "family": ..., "generators": [...]}, ...}``."""
        known = {"model", "sample_sizes", "replications", "alpha", "bootstrap", "seed", "schema"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "model" not in d:
            raise ValueError("config needs a 'model'")
        if "seed" not in d:
            raise ValueError("config needs an explicit 'seed'")
        return cls(
            model=NacModel.from_dict(d["model"]),
            sample_sizes=tuple(d.get("sample_sizes", DEFAULT_SAMPLE_SIZES)),
            replications=int(d.get("replications", DEFAULT_REPLICATIONS)),
            alpha=float(d.get("alpha", DEFAULT_ALPHA)),
            bootstrap=int(d.get("bootstrap", DEFAULT_BOOTSTRAP)),
            seed=int(d["seed"]),
        )


@dataclass
class ResultRow:
    n: int
    correct_fraction: float
    se: float
    replications: int
    outcomes: list = field(default_factory=list, repr=False)


def run_replication(cfg: ExperimentConfig, n: int, rep: int) -> bool:
    """One sample of size ``n`` and whether its estimate equals the model tree."""
    try:
        data = sample_nac(cfg.model, n, make_rng(cfg.seed, n, rep, 0))
        est = estimate_structure(
            data,
            alpha0=cfg.alpha,
            B=cfg.bootstrap,
            seed=seed_sequence(cfg.seed, n, rep, 1),
            labels=cfg.model.tree.leaves,
        )
    except Exception as exc:
        raise ExperimentError(f"replication {rep} at n={n}: {exc}") from exc
    return est.tree == cfg.model.tree


def _job(args):
    cfg, n, rep = args
    return run_replication(cfg, n, rep)


def run_experiment(cfg: ExperimentConfig, workers: int = 1, progress=None) -> list:
    """Rows of ``(n, correct_fraction, se, replications)`` in ``sample_sizes`` order."""
    rows = []
    for n in cfg.sample_sizes:
        jobs = [(cfg, n, r) for r in range(cfg.replications)]
        if workers > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(workers) as pool:
                outcomes = list(pool.map(_job, jobs))
        else:
            outcomes = [_job(j) for j in jobs]
        p = sum(outcomes) / len(outcomes)
        se = math.sqrt(p * (1.0 - p) / len(outcomes))
        rows.append(ResultRow(n, p, se, len(outcomes), outcomes))
        if progress is not None:
            progress(rows[-1])
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "correct_fraction", "se", "replications"])
    for r in rows:
        w.writerow([r.n, repr(float(r.correct_fraction)), repr(float(r.se)), r.replications])
    return buf.getvalue()
