"""Skorokhod problem on the orthant: the fast scheme and two reference solvers.

The fast scheme applies exactly one positive-part push per grid step, so its
iterates ``x^n`` may sit outside the orthant for a few steps after a jump.
The references are

* :func:`fixed_point_oracle`, Picard iteration of
  ``k = sup_{s<=t} [Q^T k_s - y_s]^+`` on the grid, and
* :func:`step_function_exact`, one full projection per jump of a step input.

:func:`check_theorem3` and :func:`check_theorem4` evaluate the a-priori error
and stability bounds with constants made explicit (see each docstring).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ReflectionMatrix, positive_part, sup_norm
from .errors import (
    DensityMismatch,
    DimensionMismatch,
    MaxIterExceeded,
    OrthantReflectError,
    StartOutsideOrthant,
    VerificationFailed,
)
from .paths import (
    GridPath,
    StepFunction,
    delay_one_step,
    modulus_of_continuity,
    refine,
    running_sup,
    sup_distance,
)
from .projection import DEFAULT_TOL, default_max_iter, polish_iters, project_fixed_point

# the max form and the incremental form round differently; relative to the
# path scale they must agree to this
_FORM_RTOL = 1e-14


# Callbacks ``hook(Q, y_values, k_values)`` invoked after every fast-scheme run
# (deterministic or SDE, single or batched).
scheme_observers: list = []


def notify_scheme_observers(Q, y_values, k_values) -> None:
    for hook in scheme_observers:
        hook(Q, y_values, k_values)


@dataclass(frozen=True, eq=False)
class SkorokhodSolution:
    x: GridPath
    k: GridPath
    y: GridPath | None = None

    def __post_init__(self):
        if self.x.n != self.k.n or self.x.d != self.k.d or self.x.steps != self.k.steps:
            raise DimensionMismatch("x and k must share density, dimension and horizon")


@dataclass(frozen=True)
class BoundReport:
    lhs: float
    rhs: float
    passed: bool
    details: dict = field(default_factory=dict)


def _check_start(Q: ReflectionMatrix, y: GridPath) -> None:
    if y.d != Q.d:
        raise DimensionMismatch(f"path has d={y.d}, matrix has d={Q.d}")
    if np.any(y.values[0] < 0):
        raise StartOutsideOrthant(f"y_0 = {y.values[0]} is not in the orthant")


def push_step(Q: ReflectionMatrix, x: np.ndarray, dy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One step of the fast scheme: returns ``(x_next, push)``.

    ``x_next = x + dy + (I - Q^T)[-(x + dy)]^+`` and the regulator grows by
    ``push``.  Works on a single state or a stack of states.
    """
    w = x + dy
    push = np.maximum(-w, 0.0)
    return w + push - push @ Q.q, push


def max_form_regulator(Q: ReflectionMatrix, y_values: np.ndarray) -> np.ndarray:
    """Regulator from ``k_{i+1} = [Q^T k_i - y_{i+1}]^+ v k_i``, ``k_0 = 0``."""
    k = np.zeros_like(y_values)
    for i in range(y_values.shape[-2] - 1):
        k[..., i + 1, :] = np.maximum(
            positive_part(k[..., i, :] @ Q.q - y_values[..., i + 1, :]), k[..., i, :]
        )
    return k


def fixed_point_map(Q: ReflectionMatrix, u: np.ndarray, y_values: np.ndarray) -> np.ndarray:
    """``F(u)_t = sup_{s<=t} [Q^T u_s - y_s]^+`` on grid arrays."""
    return running_sup(positive_part(u @ Q.q - y_values))


def fixed_point_form_residual(Q: ReflectionMatrix, y_values: np.ndarray, k_values: np.ndarray) -> float:
    """``sup |F^n(k^{(n-)}) - k|`` on raw arrays of shape ``(..., N + 1, d)``."""
    lagged = np.concatenate([k_values[..., :1, :], k_values[..., :-1, :]], axis=-2)
    return sup_norm(fixed_point_map(Q, lagged, y_values) - k_values)


def fixed_point_form_gap(Q: ReflectionMatrix, y: GridPath, k: GridPath) -> float:
    """``sup |F^n(k^{(n-)}) - k|``; zero up to rounding for the fast-scheme regulator."""
    lagged = delay_one_step(k).values
    return sup_norm(fixed_point_map(Q, lagged, y.values) - k.values)


def _form_tolerance(*arrays: np.ndarray) -> float:
    scale = 1.0 + max(float(np.max(np.abs(a))) for a in arrays)
    return _FORM_RTOL * scale


def fast_scheme(Q: ReflectionMatrix, y: GridPath, verify: bool = False) -> SkorokhodSolution:
    """Fast approximation ``(x^n, k^n)`` of the Skorokhod solution for ``y``.

    Runs the incremental form ``x_{i+1} = x_i + dy + (I - Q^T)[-x_i - dy]^+``.
    With ``verify=True`` the regulator is recomputed from the max form
    ``k_{i+1} = [Q^T k_i - y_{i+1}]^+ v k_i`` and the two must agree;
    ``x = y + (I - Q^T) k`` is checked as well.
    """
    _check_start(Q, y)
    v = y.values
    dy = np.diff(v, axis=0)
    x = np.empty_like(v)
    k = np.empty_like(v)
    x[0] = v[0]
    k[0] = 0.0
    for i in range(dy.shape[0]):
        x[i + 1], push = push_step(Q, x[i], dy[i])
        k[i + 1] = k[i] + push
    if verify:
        k_max = max_form_regulator(Q, v)
        x_max = v + Q.reflect(k_max)
        tol = _form_tolerance(v, k, k_max)
        gap = max(sup_norm(k - k_max), sup_norm(x - x_max))
        if gap > tol:
            raise VerificationFailed(f"max form and incremental form differ by {gap!r} > {tol!r}")
    notify_scheme_observers(Q, v, k)
    return SkorokhodSolution(GridPath(y.n, y.horizon, x), GridPath(y.n, y.horizon, k), y)


def fixed_point_oracle(
    Q: ReflectionMatrix,
    y: GridPath,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
) -> SkorokhodSolution:
    """Exact Skorokhod solution of the step path ``y`` by Picard iteration from ``k = 0``."""
    _check_start(Q, y)
    v = y.values
    q = Q.col_norm
    if max_iter is None:
        max_iter = default_max_iter(q, tol, sup_norm(v))
    k = np.zeros_like(v)
    for _ in range(max_iter):
        k_next = fixed_point_map(Q, k, v)
        step = sup_norm(k_next - k)
        k = k_next
        if step <= tol * (1.0 - q):
            break
    else:
        raise MaxIterExceeded(f"Picard iteration did not reach tol={tol} in {max_iter} steps")
    for _ in range(polish_iters(q)):
        if step == 0.0:
            break
        k_next = fixed_point_map(Q, k, v)
        step = sup_norm(k_next - k)
        k = k_next
    x = v + Q.reflect(k)
    return SkorokhodSolution(GridPath(y.n, y.horizon, x), GridPath(y.n, y.horizon, k), y)


def step_function_exact(
    Q: ReflectionMatrix, y: StepFunction, tol: float = DEFAULT_TOL
) -> tuple[StepFunction, StepFunction]:
    """Exact ``(x, k)`` for a step input: project at every jump, hold in between."""
    if y.d != Q.d:
        raise DimensionMismatch(f"step function has d={y.d}, matrix has d={Q.d}")
    if np.any(y.values[0] < 0):
        raise StartOutsideOrthant(f"y_0 = {y.values[0]} is not in the orthant")
    xs = [y.values[0]]
    ks = [np.zeros(Q.d)]
    for prev, cur in zip(y.values[:-1], y.values[1:]):
        res = project_fixed_point(Q, xs[-1] + (cur - prev), tol)
        xs.append(res.pi)
        ks.append(ks[-1] + res.r_bar)
    return StepFunction(y.times, np.array(xs)), StepFunction(y.times, np.array(ks))


def theorem3_constants(q: float) -> dict:
    """Explicit constants behind ``sup|x^n-x| + sup|k^n-k| <= C omega_{1/n}(y)``.

    The regulator estimate ``I1 + I2 + I3`` with ``I1 <= q/(1-q) w``,
    ``I2 <= w`` and ``I3 <= q sup|k^n - k|`` gives ``sup|k^n-k| <= w/(1-q)^2``.
    Subtracting ``x = y + (I-Q^T)k`` from its scheme version gives
    ``sup|x^n-x| <= w + (1+q) sup|k^n-k|``.
    """
    c_k = 1.0 / (1.0 - q) ** 2
    c_x = 1.0 + (1.0 + q) * c_k
    return {"c_k": c_k, "c_x": c_x, "c_total": c_k + c_x}


def check_theorem3(
    Q: ReflectionMatrix,
    y: GridPath,
    reference: SkorokhodSolution,
    t: float | None = None,
) -> BoundReport:
    """Compare the fast scheme on ``y`` (density n) against ``reference``.

    ``reference`` may live on a finer grid of density ``m = c n``; then its
    ``y`` must be the underlying input sampled at density m, the scheme output
    is compared as a step function on the fine grid and the modulus is taken
    on the fine input.
    """
    ref_n = reference.x.n
    if ref_n % y.n:
        raise DensityMismatch(f"reference density {ref_n} is not a multiple of {y.n}")
    factor = ref_n // y.n
    y_fine = reference.y if reference.y is not None else refine(y, factor)
    if y_fine.n != ref_n:
        raise DensityMismatch("reference input and reference solution densities differ")
    t_end = y.horizon if t is None else t
    coarse = y_fine.values[::factor][: y.steps + 1]
    if coarse.shape != y.values.shape or not np.array_equal(coarse, y.values):
        raise OrthantReflectError("y is not the coarse sampling of the reference input")
    sol = fast_scheme(Q, y)
    x_err = sup_distance(refine(sol.x, factor), reference.x, t_end)
    k_err = sup_distance(refine(sol.k, factor), reference.k, t_end)
    omega = modulus_of_continuity(y_fine, 1.0 / y.n, t_end)
    consts = theorem3_constants(Q.col_norm)
    lhs = x_err + k_err
    rhs = consts["c_total"] * omega
    passed = lhs <= rhs and k_err <= consts["c_k"] * omega
    details = {"x_err": x_err, "k_err": k_err, "omega": omega, **consts}
    return BoundReport(lhs=lhs, rhs=rhs, passed=passed, details=details)


def theorem4_constants(q: float) -> dict:
    """``sup|k1-k2| <= d/(1-q)`` and, adding ``x = y + (I-Q^T)k``, ``x+k`` parts ``<= 3d/(1-q)``."""
    c_k = 1.0 / (1.0 - q)
    return {"c_k": c_k, "c_total": c_k + 1.0 + (1.0 + q) * c_k}


def check_theorem4(
    Q: ReflectionMatrix, y1: GridPath, y2: GridPath, t: float | None = None
) -> BoundReport:
    if y1.n != y2.n:
        raise DensityMismatch(f"densities differ: {y1.n} != {y2.n}")
    if y1.d != y2.d or y1.steps != y2.steps:
        raise DimensionMismatch("paths must share dimension and horizon")
    t_end = y1.horizon if t is None else t
    s1 = fast_scheme(Q, y1)
    s2 = fast_scheme(Q, y2)
    dist = sup_distance(y1, y2, t_end)
    k_gap = sup_distance(s1.k, s2.k, t_end)
    x_gap = sup_distance(s1.x, s2.x, t_end)
    consts = theorem4_constants(Q.col_norm)
    rhs_k = consts["c_k"] * dist
    rhs = consts["c_total"] * dist
    # a few ulps of slack: the bound is tight when y1 - y2 is constant
    slack = 1e-12 * (1.0 + dist)
    passed = k_gap <= rhs_k + slack and k_gap + x_gap <= rhs + slack
    details = {"k_gap": k_gap, "x_gap": x_gap, "y_dist": dist, "rhs_k": rhs_k, **consts}
    return BoundReport(lhs=k_gap + x_gap, rhs=rhs, passed=passed, details=details)


def running_max_reflection(y: GridPath) -> SkorokhodSolution:
    """Closed-form one-dimensional normal reflection ``k_t = sup_{s<=t} [-y_s]^+``."""
    if y.d != 1:
        raise DimensionMismatch("running-max reflection is one-dimensional")
    k = running_sup(positive_part(-y.values))
    return SkorokhodSolution(
        GridPath(y.n, y.horizon, y.values + k), GridPath(y.n, y.horizon, k), y
    )
