"""Cadlag step paths on a uniform grid.

A :class:`GridPath` of density ``n`` stores the values at ``i/n`` for
``i = 0..floor(nT)`` and is constant on each ``[i/n, (i+1)/n)``.  It carries
inputs, scheme outputs and Brownian drivers alike.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from os import PathLike
from typing import Callable, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import csvio
from .errors import (
    ConfigParse,
    DensityMismatch,
    DimensionMismatch,
    NonpositiveHorizon,
    OrthantReflectError,
    ZeroDensity,
)

# slack for floor(n * t) when t is meant to sit exactly on the grid
_GRID_EPS = 1e-9


def grid_index(n: int, t: float) -> int:
    """Index of the last grid point ``i/n <= t``."""
    return int(math.floor(n * t + _GRID_EPS))


@dataclass(frozen=True, eq=False)
class GridPath:
    n: int
    horizon: float
    values: np.ndarray

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ZeroDensity(f"grid density must be a positive integer, got {self.n}")
        if not self.horizon > 0:
            raise NonpositiveHorizon(f"horizon must be positive, got {self.horizon}")
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        expected = grid_index(self.n, self.horizon) + 1
        if v.ndim != 2 or v.shape[0] != expected:
            raise DimensionMismatch(
                f"expected {expected} grid values for n={self.n}, T={self.horizon}, "
                f"got array of shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise OrthantReflectError("path values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) / self.n

    def index(self, t: float) -> int:
        return min(grid_index(self.n, t), self.steps)

    def at(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError(f"negative time {t}")
        return self.values[self.index(t)]

    def __len__(self) -> int:
        return self.values.shape[0]

    def __repr__(self) -> str:
        return f"GridPath(n={self.n}, horizon={self.horizon}, d={self.d}, steps={self.steps})"


@dataclass(frozen=True, eq=False)
class StepFunction:
    """``y_t = values[i]`` for ``t`` in ``[times[i], times[i+1])``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float).ravel()
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if t.size == 0 or t[0] != 0:
            raise OrthantReflectError("step function must start with jump time 0")
        if np.any(np.diff(t) <= 0):
            raise OrthantReflectError("jump times must be strictly increasing")
        if v.shape[0] != t.size:
            raise DimensionMismatch(f"{t.size} jump times but {v.shape[0]} values")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise OrthantReflectError("step function must be finite")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def __call__(self, t):
        idx = np.searchsorted(self.times, t, side="right") - 1
        if np.any(idx < 0):
            raise ValueError("step function evaluated at negative time")
        return self.values[idx]


PathSource = Union[StepFunction, Callable[[float], object]]


def discretize(f: PathSource, n: int, horizon: float) -> GridPath:
    """Sample ``f`` at ``i/n``; a plain callable is called once per grid time."""
    if int(n) != n or n < 1:
        raise ZeroDensity(f"grid density must be a positive integer, got {n}")
    if not horizon > 0:
        raise NonpositiveHorizon(f"horizon must be positive, got {horizon}")
    times = np.arange(grid_index(n, horizon) + 1) / n
    if isinstance(f, StepFunction):
        values = f(times)
    else:
        values = np.array([np.atleast_1d(np.asarray(f(t), dtype=float)) for t in times])
    return GridPath(n, horizon, values)


def delay_one_step(u: GridPath) -> GridPath:
    """``out[i] = u[i-1]`` for ``i >= 1`` and ``out[0] = u[0]``."""
    v = np.concatenate([u.values[:1], u.values[:-1]])
    return GridPath(u.n, u.horizon, v)


def refine(u: GridPath, factor: int) -> GridPath:
    """The same step function re-sampled on the grid of density ``factor * n``."""
    if int(factor) != factor or factor < 1:
        raise ZeroDensity(f"refinement factor must be a positive integer, got {factor}")
    m = u.n * int(factor)
    idx = np.arange(grid_index(m, u.horizon) + 1) // int(factor)
    return GridPath(m, u.horizon, u.values[np.minimum(idx, u.steps)])


def modulus_of_continuity(y: GridPath, delta: float, t: float | None = None) -> float:
    """``sup |y_s - y_s'|`` over grid times ``s, s' <= t`` with ``|s - s'| <= delta``.

    For a step path the grid sup is the exact sup.  Per component, the largest
    difference inside a window is max minus min, hence the sliding windows.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    last = y.index(y.horizon if t is None else t)
    v = y.values[: last + 1]
    lag = min(grid_index(y.n, delta), last)
    if lag == 0:
        return 0.0
    windows = sliding_window_view(v, lag + 1, axis=0)
    spread = windows.max(axis=-1) - windows.min(axis=-1)
    return float(spread.max())


def _check_compatible(a: GridPath, b: GridPath) -> None:
    if a.n != b.n:
        raise DensityMismatch(f"densities differ: {a.n} != {b.n}")
    if a.d != b.d:
        raise DimensionMismatch(f"dimensions differ: {a.d} != {b.d}")


def sup_distance(a: GridPath, b: GridPath, t: float | None = None) -> float:
    _check_compatible(a, b)
    t_end = min(a.horizon, b.horizon) if t is None else t
    last = min(a.index(t_end), b.index(t_end))
    diff = a.values[: last + 1] - b.values[: last + 1]
    return float(np.max(np.abs(diff)))


def running_sup(values: np.ndarray) -> np.ndarray:
    """Componentwise ``sup_{s <= t}`` along the time axis (axis 0 or -2)."""
    return np.maximum.accumulate(values, axis=-2 if values.ndim > 1 else 0)


# CSV: header ``t,x1,...,xd``, one row per grid point.

def path_csv_text(u: GridPath, name: str = "x") -> str:
    header = ["t", *(f"{name}{j + 1}" for j in range(u.d))]
    rows = np.column_stack([u.times, u.values])
    return csvio.table_text(header, rows)


def write_path_csv(u: GridPath, dest: str | PathLike, name: str = "x") -> None:
    with open(dest, "w", encoding="utf-8", newline="") as fh:
        fh.write(path_csv_text(u, name))


def grid_from_times(times: np.ndarray, source: str = "<csv>", n: int | None = None) -> tuple[int, float]:
    """Infer ``(n, horizon)`` from a column of grid times, checking uniform spacing."""
    if times.size == 0:
        raise ConfigParse(f"{source}: no data rows")
    if times[0] != 0:
        raise ConfigParse(f"{source}: first time must be 0, got {times[0]!r}")
    if times.size == 1:
        if n is None:
            raise ConfigParse(f"{source}: cannot infer grid density from a single row")
        return int(n), 0.5 / n
    steps = np.diff(times)
    h = (times[-1] - times[0]) / (times.size - 1)
    bad = np.flatnonzero(np.abs(steps - h) > 1e-9 * h)
    if bad.size:
        i = int(bad[0])
        raise ConfigParse(
            f"{source}: non-uniform spacing between rows {i + 1} and {i + 2} "
            f"({steps[i]!r} vs mean {h!r})"
        )
    inferred = round(1.0 / h)
    if abs(1.0 / h - inferred) > 1e-6 * inferred:
        raise ConfigParse(f"{source}: spacing {h!r} is not 1/n for an integer n")
    if n is not None and n != inferred:
        raise ConfigParse(f"{source}: spacing implies n={inferred}, expected {n}")
    return int(inferred), (times.size - 1) / inferred


def read_path_csv(source: str | PathLike, n: int | None = None) -> GridPath:
    header, data, _ = csvio.read_table(source)
    if not header or header[0] != "t" or len(header) < 2:
        raise ConfigParse(f"{source}: header must be 't,x1,...,xd', got {','.join(header)}")
    density, horizon = grid_from_times(data[:, 0], str(source), n)
    return GridPath(density, horizon, data[:, 1:])
