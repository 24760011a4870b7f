"""Experiment report container and small statistics helpers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..serialize import dumps, rows_to_csv

# Slack allowed on exact inequalities, relative to the larger side.
INEQUALITY_SLACK = 1e-12


def holds_le(lhs, rhs, slack=INEQUALITY_SLACK):
    return lhs <= rhs + slack * max(abs(lhs), abs(rhs))


def stats(values):
    """Count, min, max and mean of the finite entries (None when there are none)."""
    v = np.asarray([x for x in values if x is not None], dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"count": 0, "min": None, "max": None, "mean": None}
    return {"count": int(v.size), "min": float(v.min()), "max": float(v.max()), "mean": float(v.mean())}


def fit_loglog(x, y):
    """Least-squares slope of ``log y`` against ``log x`` over points with ``x, y > 0``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    n = int(ok.sum())
    if n < 2 or np.ptp(np.log(x[ok])) == 0:
        return {"slope": None, "intercept": None, "residual_rms": None, "count": n}
    lx, ly = np.log(x[ok]), np.log(y[ok])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return {"slope": float(slope), "intercept": float(intercept),
            "residual_rms": float(np.sqrt(np.mean(resid**2))), "count": n}


@dataclass
class Check:
    """Running tally of one asserted inequality across all observations."""

    name: str
    evaluated: int = 0
    failures: int = 0
    first_failure: dict | None = None

    def record(self, ok, **where):
        self.evaluated += 1
        if not ok:
            self.failures += 1
            if self.first_failure is None:
                self.first_failure = where

    @property
    def holds(self):
        return self.failures == 0

    def to_dict(self):
        return {"name": self.name, "evaluated": self.evaluated, "failures": self.failures,
                "holds": self.holds, "first_failure": self.first_failure}


@dataclass
class ExperimentReport:
    """Result of one experiment run.

    ``rows`` holds one flat record per observation (the CSV body), each carrying
    its instance seed; ``summary`` holds fitted exponents and constants with
    their sample counts; ``checks`` tallies every asserted inequality.
    """

    experiment: str
    params: dict
    columns: list
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    config: dict | None = None

    @property
    def passed(self):
        return all(c.holds for c in self.checks)

    def check(self, name):
        return next(c for c in self.checks if c.name == name)

    def to_dict(self):
        d = {
            "experiment": self.experiment,
            "params": self.params,
            "columns": self.columns,
            "rows": self.rows,
            "summary": self.summary,
            "checks": [c.to_dict() for c in self.checks],
            "passed": self.passed,
        }
        if self.config is not None:
            d["config"] = self.config
        return d

    def to_json(self):
        return dumps(self.to_dict())

    def to_csv(self):
        header = [f"experiment: {self.experiment}", f"columns: {', '.join(self.columns)}"]
        header += [f"{k}: {v}" for k, v in sorted(self.params.items()) if not isinstance(v, dict)]
        return rows_to_csv(self.columns, self.rows, header)
