"""Unsupervised iterative filters.

Both filters maintain a shrinking candidate-anomaly set over the samples.
The error-threshold filter (AD-DL) grows a concatenated dictionary, one
freshly trained stage per global iteration, and keeps as candidates the
samples whose reconstruction error exceeds the mean error frozen after the
first iteration. The popularity filter retrains from scratch each
iteration and keeps the samples whose codes touch at least one rare atom
(popularity <= the assumed anomaly count), stopping once the candidate set
is small enough or stops shrinking.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError
from .dictionary_learning import DLConfig, train
from .sparse_coding import (
    CodingConfig,
    Dictionary,
    atom_popularity,
    batch_code,
    representation_errors,
)


@dataclass
class TraceRecord:
    iteration: int
    card: int
    fp: int | None
    fn: int | None
    mean_err: float


@dataclass
class FilterTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, iteration, active, truth, mean_err, n_total):
        fp = fn = None
        if truth is not None:
            est = np.zeros(n_total, dtype=int)
            est[active] = 1
            fp = int(np.sum((est == 1) & (truth == 0)))
            fn = int(np.sum((est == 0) & (truth == 1)))
        self.records.append(TraceRecord(iteration, int(active.size), fp, fn, float(mean_err)))

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["iter", "card_A", "fp", "fn", "mean_err"])
            for r in self.records:
                w.writerow([
                    r.iteration,
                    r.card,
                    "" if r.fp is None else r.fp,
                    "" if r.fn is None else r.fn,
                    repr(r.mean_err),
                ])


@dataclass(frozen=True)
class ADDLConfig:
    global_iterations: int
    per_stage: DLConfig  # its iterations = DL rounds per stage, n_atoms = atoms per stage
    coding: CodingConfig

    def __post_init__(self):
        if self.global_iterations < 1:
            raise DataError("global_iterations must be >= 1")


@dataclass(frozen=True)
class PopularityConfig:
    n_anomalies: int
    per_stage: DLConfig
    coding: CodingConfig
    max_iterations: int = 100
    literal_set_builder: bool = False

    def __post_init__(self):
        if self.n_anomalies < 1:
            raise DataError("n_anomalies must be >= 1")
        if self.max_iterations < 1:
            raise DataError("max_iterations must be >= 1")


def _stage_seed(base_seed: int, iteration: int) -> int:
    # deterministic per-stage seed derived from (base seed, iteration index)
    return int(np.random.SeedSequence([base_seed, iteration]).generate_state(1)[0])


def addl_run(Y: np.ndarray, cfg: ADDLConfig, truth=None):
    """Error-threshold filter over a growing concatenated dictionary.

    Each global iteration trains a fresh stage dictionary on the current
    candidate set, concatenates it, codes all N samples against the
    accumulated dictionary and recomputes all N errors. The mean error is
    frozen after iteration 1; candidates are the samples with error
    strictly above it. Returns ({0,1} labels, trace)."""
    Y = np.asarray(Y, dtype=float)
    N = Y.shape[1]
    if truth is not None:
        truth = np.asarray(truth, dtype=int)
        if truth.shape != (N,):
            raise DataError("ground-truth labels must have one entry per sample")
    active = np.arange(N)
    acc_atoms = None
    e_mean = None
    trace = FilterTrace()
    for it in range(cfg.global_iterations):
        if active.size == 0:
            break
        stage_cfg = replace(cfg.per_stage, seed=_stage_seed(cfg.per_stage.seed, it))
        stage = train(Y[:, active], stage_cfg)
        acc_atoms = (
            stage.dictionary.atoms
            if acc_atoms is None
            else np.hstack([acc_atoms, stage.dictionary.atoms])
        )
        D = Dictionary(acc_atoms)
        X = batch_code(D, Y, cfg.coding)
        e = representation_errors(D, Y, X)
        if it == 0:
            e_mean = float(np.mean(e))
        active = np.flatnonzero(e > e_mean)
        trace.append(it + 1, active, truth, np.mean(e), N)
    labels = np.zeros(N, dtype=int)
    labels[active] = 1
    return labels, trace


def popularity_filter_run(Y: np.ndarray, cfg: PopularityConfig, truth=None):
    """Atom-popularity filter with a fresh dictionary per iteration.

    Default semantics keep a candidate only if its support touches a rare
    atom (popularity <= n_anomalies); signals represented exclusively by
    popular atoms are released as normal. literal_set_builder inverts this
    and keeps signals touching any popular atom. Stops when the candidate
    set is <= n_anomalies, stops shrinking, or max_iterations is hit."""
    Y = np.asarray(Y, dtype=float)
    N = Y.shape[1]
    if cfg.n_anomalies >= N:
        raise DataError(f"n_anomalies {cfg.n_anomalies} must be < sample count {N}")
    if cfg.coding.s > cfg.per_stage.n_atoms:
        raise DataError("coding sparsity exceeds the stage dictionary size")
    if truth is not None:
        truth = np.asarray(truth, dtype=int)
        if truth.shape != (N,):
            raise DataError("ground-truth labels must have one entry per sample")
    active = np.arange(N)
    trace = FilterTrace()
    for it in range(cfg.max_iterations):
        size_before = active.size
        stage_cfg = replace(cfg.per_stage, seed=_stage_seed(cfg.per_stage.seed, it))
        stage = train(Y[:, active], stage_cfg)
        X = batch_code(stage.dictionary, Y[:, active], cfg.coding)
        errs = representation_errors(stage.dictionary, Y[:, active], X)
        p = atom_popularity(X)
        rare = p <= cfg.n_anomalies
        if cfg.literal_set_builder:
            keep = [i for i, c in enumerate(X.columns) if np.any(~rare[c.support])]
        else:
            keep = [i for i, c in enumerate(X.columns) if np.any(rare[c.support])]
        active = active[np.array(keep, dtype=int)] if keep else active[:0]
        trace.append(it + 1, active, truth, float(np.mean(errs)), N)
        if active.size <= cfg.n_anomalies or active.size == size_before:
            break
    labels = np.zeros(N, dtype=int)
    labels[active] = 1
    return labels, trace
