"""Residual check records shared by every suite."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = ["CheckRecord", "CheckReport", "pointwise_max", "record"]


def pointwise_max(arr) -> np.ndarray:
    """Max absolute entry per sample (first axis)."""
    a = np.abs(np.asarray(arr, float))
    if a.ndim == 1:
        return a
    return a.reshape(a.shape[0], -1).max(axis=1)


@dataclass
class CheckRecord:
    """One residual check over a batch of sample points.

    ``comparator`` is ``"<="`` for residual bounds (pass iff the statistic is at
    most the tolerance) and ``">="`` for witnesses and positivity floors.
    ``statistic`` defaults to the max residual; positivity floors use the min.
    Diagnostic records are reported but do not decide the overall verdict.
    """

    check_id: str
    anchor: str
    residuals: np.ndarray
    tolerance: float
    points: np.ndarray
    comparator: str = "<="
    reduce: str = "max"
    values: np.ndarray | None = None
    note: str = ""
    diagnostic: bool = False

    @property
    def statistic(self) -> float:
        r = np.asarray(self.residuals, float)
        if self.reduce == "min":
            return float(np.min(r))
        if self.reduce == "spread":
            return float(np.max(r) - np.min(r))
        if self.reduce == "std":
            return float(np.std(r))
        return float(np.max(r))

    @property
    def passed(self) -> bool:
        s = self.statistic
        if not np.isfinite(s):
            return False
        return s <= self.tolerance if self.comparator == "<=" else s >= self.tolerance

    @property
    def witness_index(self) -> int:
        r = np.asarray(self.residuals, float)
        if self.comparator == "<=":
            return int(np.nanargmax(r)) if self.reduce != "min" else int(np.nanargmin(r))
        return int(np.nanargmin(r)) if self.reduce == "min" else int(np.nanargmax(r))

    @property
    def witness(self) -> np.ndarray:
        return np.asarray(self.points)[self.witness_index]

    def scaled(self, factor: float) -> CheckRecord:
        tol = self.tolerance * factor if self.comparator == "<=" else self.tolerance
        return replace(self, tolerance=tol)

    def as_diagnostic(self, note: str = "") -> CheckRecord:
        return replace(self, diagnostic=True, note=note or self.note)

    def as_witness(self, floor: float, note: str = "") -> CheckRecord:
        return replace(self, comparator=">=", tolerance=float(floor), note=note or self.note)


def record(check_id: str, anchor: str, residual_array, tol: float, points, signed: bool = False, **kw) -> CheckRecord:
    """Reduce ``residual_array`` to one value per sample: max |entry|, or the raw values when ``signed``."""
    res = np.asarray(residual_array, float).reshape(-1) if signed else pointwise_max(residual_array)
    return CheckRecord(check_id, anchor, res, float(tol), np.asarray(points), **kw)


@dataclass
class CheckReport:
    records: list[CheckRecord] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records if not r.diagnostic)

    def add(self, *recs: CheckRecord) -> CheckReport:
        self.records.extend(recs)
        return self

    def extend(self, other: CheckReport) -> CheckReport:
        self.records.extend(other.records)
        for k, v in other.metadata.items():
            self.metadata.setdefault(k, v)
        return self

    def __getitem__(self, check_id: str) -> CheckRecord:
        for r in self.records:
            if r.check_id == check_id:
                return r
        raise KeyError(check_id)

    def ids(self) -> Iterable[str]:
        return [r.check_id for r in self.records]

    def failures(self) -> list[CheckRecord]:
        return [r for r in self.records if not r.passed and not r.diagnostic]
