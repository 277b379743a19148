"""Strong-error rate reports and the log-log fit behind them.

The x-axis of every rate fit is ``(ln n) / n``: a scheme with error of order
``((ln n) / n)^p`` shows up as a straight line of slope ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Sequence

import numpy as np

from . import csvio
from .errors import ConfigParse, DegenerateInput

RATE_HEADER = ("n", "h", "mean_err_2p", "stderr", "log_x", "log_y")


def fit_loglog(points: Iterable[tuple[float, float]]) -> tuple[float, float, float]:
    """OLS fit of ``log y = slope * log x + intercept``; returns ``(slope, intercept, r2)``."""
    pts = np.asarray(list(points), dtype=float).reshape(-1, 2)
    if pts.shape[0] < 2:
        raise DegenerateInput(f"need at least 2 points, got {pts.shape[0]}")
    if np.any(~np.isfinite(pts)) or np.any(pts <= 0):
        raise DegenerateInput("log-log fit needs finite positive coordinates")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.unique(lx).size < 2:
        raise DegenerateInput("need at least 2 distinct x values")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def rate_abscissa(n: int) -> float:
    return math.log(n) / n


@dataclass(frozen=True)
class RateRow:
    n: int
    mean_err_2p: float
    stderr: float

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def log_x(self) -> float:
        x = rate_abscissa(self.n)
        return math.log(x) if x > 0 else float("nan")

    @property
    def log_y(self) -> float:
        return math.log(self.mean_err_2p) if self.mean_err_2p > 0 else float("nan")


@dataclass(frozen=True)
class RateReport:
    rows: list[RateRow]
    slope: float
    intercept: float
    r_squared: float
    p: int = 1
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_rows(cls, rows: Sequence[RateRow], p: int = 1, **extra) -> "RateReport":
        rows = sorted(rows, key=lambda r: r.n)
        usable = [(rate_abscissa(r.n), r.mean_err_2p) for r in rows if r.mean_err_2p > 0 and r.n > 1]
        try:
            slope, intercept, r2 = fit_loglog(usable)
        except DegenerateInput:
            slope = intercept = r2 = float("nan")
        return cls(list(rows), slope, intercept, r2, p, dict(extra))

    @property
    def densities(self) -> list[int]:
        return [r.n for r in self.rows]

    def to_csv(self) -> str:
        rows = [(r.n, r.h, r.mean_err_2p, r.stderr, r.log_x, r.log_y) for r in self.rows]
        trailer = [
            f"slope={csvio.fmt(self.slope)},intercept={csvio.fmt(self.intercept)},"
            f"r_squared={csvio.fmt(self.r_squared)},p={self.p}"
        ]
        return csvio.table_text(RATE_HEADER, rows, trailer)

    def write_csv(self, dest: str | PathLike) -> None:
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def read_rate_csv(source: str | PathLike) -> RateReport:
    header, data, trailer = csvio.read_table(source)
    if tuple(header) != RATE_HEADER:
        raise ConfigParse(f"{source}: unexpected rate header {header}")
    rows = [RateRow(int(r[0]), float(r[2]), float(r[3])) for r in data]
    fit = {}
    for line in trailer:
        for item in line.split(","):
            if "=" in item:
                key, _, val = item.partition("=")
                fit[key.strip()] = val.strip()
    try:
        return RateReport(
            rows,
            float(fit["slope"]),
            float(fit["intercept"]),
            float(fit["r_squared"]),
            int(fit.get("p", 1)),
        )
    except KeyError as exc:
        raise ConfigParse(f"{source}: missing fit trailer field {exc}") from None
