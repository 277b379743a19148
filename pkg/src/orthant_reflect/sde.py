"""Reflected SDEs on the orthant: drivers and the fast Euler schemes.

Coefficient fields act on stacks of states: ``drift(x)`` maps shape
``(..., d)`` to ``(..., d)`` and ``diffusion(x)`` maps it to ``(..., d, d)``.
All simulations run a batch of paths at once; path ``m`` of a Monte Carlo
run always uses the Wiener path seeded with ``base_seed + m``, so results do
not depend on batch layout.

Brownian increments come from :func:`numpy.random.default_rng` (PCG64) and
``Generator.standard_normal``, scaled by ``sqrt(1/n_max)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ReflectionMatrix, as_vector, positive_part
from .errors import (
    DimensionMismatch,
    InsufficientPaths,
    NonFiniteCoefficient,
    NotADivisor,
    StartOutsideOrthant,
    VerificationFailed,
)
from .paths import GridPath, grid_index
from .report import RateReport, RateRow
from .skorokhod import SkorokhodSolution, notify_scheme_observers, push_step

Field = Callable[[np.ndarray], np.ndarray]

_SEED_MASK = (1 << 64) - 1
# the max-form rerun evaluates the coefficients at its own states, so rounding
# differences can be amplified by the Lipschitz constants; relative tolerance
_FORM_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiffusionModel:
    x0: np.ndarray
    drift: Field
    diffusion: Field
    lipschitz_hint: float | None = None

    def __post_init__(self):
        x0 = as_vector(self.x0)
        if np.any(x0 < 0):
            raise StartOutsideOrthant(f"x0 = {x0} is not in the orthant")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)

    @property
    def d(self) -> int:
        return self.x0.shape[0]


@dataclass(frozen=True)
class WienerConfig:
    seed: int
    n_max: int
    d: int
    horizon: float = 1.0

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    def for_path(self, index: int) -> "WienerConfig":
        return WienerConfig(self.seed + index, self.n_max, self.d, self.horizon)


@dataclass(frozen=True, eq=False)
class DriverStream:
    """A driver path on density ``n``; ``increments[i] = Z_{(i+1)/n} - Z_{i/n}``."""

    path: GridPath

    @classmethod
    def from_increments(cls, n: int, horizon: float, increments, origin=None) -> "DriverStream":
        inc = np.asarray(increments, dtype=float)
        if inc.ndim == 1:
            inc = inc[:, None]
        start = np.zeros(inc.shape[1]) if origin is None else as_vector(origin, inc.shape[1])
        values = np.vstack([start, start + np.cumsum(inc, axis=0)])
        return cls(GridPath(n, horizon, values))

    @property
    def n(self) -> int:
        return self.path.n

    @property
    def horizon(self) -> float:
        return self.path.horizon

    @property
    def d(self) -> int:
        return self.path.d

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.path.values, axis=0)


def _wiener_values(cfg: WienerConfig) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed & _SEED_MASK)
    steps = grid_index(cfg.n_max, cfg.horizon)
    inc = rng.standard_normal((steps, cfg.d)) * math.sqrt(1.0 / cfg.n_max)
    out = np.zeros((steps + 1, cfg.d))
    np.cumsum(inc, axis=0, out=out[1:])
    return out


def generate_wiener(cfg: WienerConfig) -> GridPath:
    return GridPath(cfg.n_max, cfg.horizon, _wiener_values(cfg))


def wiener_batch(cfg: WienerConfig, paths: int) -> np.ndarray:
    """``(paths, steps + 1, d)`` array; row ``m`` equals ``generate_wiener(cfg.for_path(m))``."""
    return np.stack([_wiener_values(cfg.for_path(m)) for m in range(paths)])


def _coarsen_factor(n_max: int, n: int) -> int:
    if n < 1 or n_max % n:
        raise NotADivisor(f"density {n} does not divide {n_max}")
    return n_max // n


def coarsen(w: GridPath, n: int) -> DriverStream:
    """Coupled driver on density ``n``: the fine path read off at every ``n_max/n``-th point."""
    factor = _coarsen_factor(w.n, n)
    steps = grid_index(n, w.horizon)
    return DriverStream(GridPath(n, w.horizon, w.values[::factor][: steps + 1]))


def _checked(value: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NonFiniteCoefficient(f"{what} returned non-finite values")
    return value


def _increment(x, dz, h, drift, diffusion):
    dy = np.einsum("...ij,...j->...i", _checked(np.asarray(diffusion(x), dtype=float), "diffusion"), dz)
    if drift is not None:
        dy = dy + _checked(np.asarray(drift(x), dtype=float), "drift") * h
    return dy


def simulate_batch(
    Q: ReflectionMatrix,
    x0,
    increments: np.ndarray,
    n: int,
    diffusion: Field,
    drift: Field | None = None,
    form: str = "incremental",
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Run the fast reflected Euler scheme on a batch of driver increments.

    ``increments`` has shape ``(M, N, d)``.  Returns ``(X, K, Y)`` of shape
    ``(M, N + 1, d)`` where ``Y`` accumulates ``b(X) / n + sigma(X) dZ``.
    ``form="max"`` uses ``K_{i+1} = [Q^T K_i - Y_{i+1}]^+ v K_i`` and
    ``X = Y + (I - Q^T) K`` instead of the one-push increment.
    """
    x0 = as_vector(x0, Q.d)
    if np.any(x0 < 0):
        raise StartOutsideOrthant(f"x0 = {x0} is not in the orthant")
    if increments.ndim != 3 or increments.shape[2] != Q.d:
        raise DimensionMismatch(f"increments must have shape (M, N, {Q.d}), got {increments.shape}")
    m, steps, d = increments.shape
    h = 1.0 / n
    X = np.empty((m, steps + 1, d))
    K = np.zeros((m, steps + 1, d))
    Y = np.empty((m, steps + 1, d))
    X[:, 0] = x0
    Y[:, 0] = x0
    for i in range(steps):
        xi = X[:, i]
        dy = _increment(xi, increments[:, i], h, drift, diffusion)
        Y[:, i + 1] = Y[:, i] + dy
        if form == "incremental":
            X[:, i + 1], push = push_step(Q, xi, dy)
            K[:, i + 1] = K[:, i] + push
        elif form == "max":
            K[:, i + 1] = np.maximum(positive_part(K[:, i] @ Q.q - Y[:, i + 1]), K[:, i])
            X[:, i + 1] = Y[:, i + 1] + Q.reflect(K[:, i + 1])
        else:
            raise ValueError(f"unknown scheme form {form!r}")
    notify_scheme_observers(Q, Y, K)
    return X, K, Y


def _verify_forms(Q, x0, increments, n, diffusion, drift, result) -> None:
    X, K, _ = result
    X_max, K_max, _ = simulate_batch(Q, x0, increments, n, diffusion, drift, form="max")
    scale = 1.0 + max(np.abs(X).max(), np.abs(K).max())
    gap = max(np.abs(X - X_max).max(), np.abs(K - K_max).max())
    if gap > _FORM_RTOL * scale:
        raise VerificationFailed(f"scheme forms differ by {gap!r} (scale {scale!r})")


def _solution(n, horizon, X, K, Y) -> SkorokhodSolution:
    return SkorokhodSolution(
        GridPath(n, horizon, X), GridPath(n, horizon, K), GridPath(n, horizon, Y)
    )


def fast_euler_semimartingale(
    Q: ReflectionMatrix,
    x0,
    sigma: Field,
    driver: DriverStream,
    verify: bool = False,
) -> SkorokhodSolution:
    """Fast scheme for ``X = X_0 + int sigma(X_-) dZ + (I - Q^T) K`` on the driver's grid.

    The returned solution's ``y`` is the accumulated ``X_0 + sum sigma(X_i) dZ_i``.
    """
    inc = driver.increments[None]
    result = simulate_batch(Q, x0, inc, driver.n, sigma)
    if verify:
        _verify_forms(Q, x0, inc, driver.n, sigma, None, result)
    X, K, Y = (a[0] for a in result)
    return _solution(driver.n, driver.horizon, X, K, Y)


def fast_euler_diffusion(
    Q: ReflectionMatrix,
    model: DiffusionModel,
    w: GridPath,
    n: int,
    verify: bool = False,
) -> SkorokhodSolution:
    """Fast scheme for the reflected diffusion at density ``n``, driven by ``w`` coarsened to ``n``."""
    if model.d != Q.d or w.d != Q.d:
        raise DimensionMismatch("model, driver and matrix dimensions differ")
    driver = coarsen(w, n)
    inc = driver.increments[None]
    result = simulate_batch(Q, model.x0, inc, n, model.diffusion, model.drift)
    if verify:
        _verify_forms(Q, model.x0, inc, n, model.diffusion, model.drift, result)
    X, K, Y = (a[0] for a in result)
    return _solution(n, w.horizon, X, K, Y)


def _coarse_increments(W: np.ndarray, factor: int, steps: int) -> np.ndarray:
    return np.diff(W[:, ::factor][:, : steps + 1], axis=1)


def _check_ladder(cfg: WienerConfig, densities: Sequence[int], paths: int) -> list[int]:
    if paths < 2:
        raise InsufficientPaths(f"need at least 2 Monte Carlo paths, got {paths}")
    densities = sorted(set(int(n) for n in densities))
    for n in densities:
        _coarsen_factor(cfg.n_max, n)
    return densities


def strong_error(
    Q: ReflectionMatrix,
    model: DiffusionModel,
    cfg: WienerConfig,
    densities: Sequence[int],
    p: int = 1,
    paths: int = 200,
) -> RateReport:
    """Monte Carlo estimate of ``E sup |X^n - X^{n_max}|^{2p}`` with coupled noise.

    The sup runs over the grid points of density n (shared with the reference
    grid).  The report's slope is fitted against ``(ln n)/n``.
    """
    if p < 1:
        raise ValueError(f"p must be a positive integer, got {p}")
    densities = _check_ladder(cfg, densities, paths)
    W = wiener_batch(cfg, paths)
    ref_steps = W.shape[1] - 1
    X_ref, _, _ = simulate_batch(
        Q, model.x0, np.diff(W, axis=1), cfg.n_max, model.diffusion, model.drift
    )
    rows = []
    for n in densities:
        factor = cfg.n_max // n
        steps = grid_index(n, cfg.horizon)
        if factor == 1:
            X = X_ref
        else:
            X, _, _ = simulate_batch(
                Q, model.x0, _coarse_increments(W, factor, steps), n,
                model.diffusion, model.drift,
            )
        shared = X_ref[:, : ref_steps + 1 : factor][:, : steps + 1]
        err = np.abs(X - shared).max(axis=(1, 2)) ** (2 * p)
        rows.append(RateRow(n, float(err.mean()), float(err.std(ddof=1) / math.sqrt(paths))))
    return RateReport.from_rows(rows, p=p, paths=paths, n_max=cfg.n_max, seed=cfg.seed)


def moment_estimates(
    Q: ReflectionMatrix,
    model: DiffusionModel,
    cfg: WienerConfig,
    densities: Sequence[int],
    p: int = 1,
    paths: int = 500,
) -> dict[int, tuple[float, float]]:
    """``n -> (mean, stderr)`` of ``sup_{s<=T} |X^n_s|^{2p}`` over coupled paths."""
    densities = _check_ladder(cfg, densities, paths)
    W = wiener_batch(cfg, paths)
    out = {}
    for n in densities:
        factor = cfg.n_max // n
        steps = grid_index(n, cfg.horizon)
        X, _, _ = simulate_batch(
            Q, model.x0, _coarse_increments(W, factor, steps), n, model.diffusion, model.drift
        )
        s = np.abs(X).max(axis=(1, 2)) ** (2 * p)
        out[n] = (float(s.mean()), float(s.std(ddof=1) / math.sqrt(paths)))
    return out


# Ready-made coefficient fields.

def constant_diffusion(matrix) -> Field:
    s = np.atleast_2d(np.asarray(matrix, dtype=float))

    def sigma(x):
        x = np.asarray(x)
        return np.broadcast_to(s, x.shape[:-1] + s.shape)

    return sigma


def zero_drift(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def mean_reverting_drift(level, speed: float = 1.0) -> Field:
    level = np.asarray(level, dtype=float)

    def drift(x):
        return speed * (level - np.asarray(x, dtype=float))

    return drift
