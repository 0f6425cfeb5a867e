"""Confusion metrics. The anomaly class (1) is the positive class."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class ConfusionReport:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n if self.n else 0.0

    def as_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "n": self.n, "accuracy": self.accuracy,
        }


def confusion(truth, estimates) -> ConfusionReport:
    truth = np.asarray(truth, dtype=int)
    estimates = np.asarray(estimates, dtype=int)
    if truth.shape != estimates.shape:
        raise DataError(f"length mismatch: {truth.shape} vs {estimates.shape}")
    return ConfusionReport(
        tp=int(np.sum((truth == 1) & (estimates == 1))),
        fp=int(np.sum((truth == 0) & (estimates == 1))),
        tn=int(np.sum((truth == 0) & (estimates == 0))),
        fn=int(np.sum((truth == 1) & (estimates == 0))),
    )
