"""Oblique projection onto the orthant.

``project(z) = z + (I - Q^T) r`` where ``r`` is the least fixed point of
``r -> [Q^T r - z]^+``.  Two routes are provided: the regulator iteration
(:func:`project_fixed_point`) and the one-push-per-step iteration
(:func:`z_sequence`).  They generate the same sequence of points, which
:func:`verify_lemma1` checks; this makes each one an oracle for the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ReflectionMatrix, as_vector, positive_part, sup_norm
from .errors import MaxIterExceeded

DEFAULT_TOL = 1e-12


@dataclass(frozen=True)
class ProjectionResult:
    z_in: np.ndarray
    pi: np.ndarray
    r_bar: np.ndarray
    iterations: int
    residual: float


def default_max_iter(q: float, tol: float, scale: float) -> int:
    """Iterations a ``q``-contraction needs to shrink ``scale`` below ``tol``, plus slack."""
    if q <= 0:
        return 16 + 1
    return int(math.ceil(math.log(tol / (1.0 + scale)) / math.log(q))) + 16


def polish_iters(q: float) -> int:
    """Extra iterations that shrink a ``tol``-accurate iterate to rounding level."""
    if q <= 0:
        return 2
    return int(math.ceil(math.log(1e-5) / math.log(q))) + 2


def project_fixed_point(
    Q: ReflectionMatrix,
    z,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
) -> ProjectionResult:
    z = as_vector(z, Q.d)
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    q = Q.col_norm
    if max_iter is None:
        max_iter = default_max_iter(q, tol, sup_norm(z))
    # increment <= tol*(1-q) implies distance to the fixed point <= tol
    stop = tol * (1.0 - q)
    r = np.zeros_like(z)
    it = 0
    step = np.inf
    while step > stop:
        if it == max_iter:
            raise MaxIterExceeded(
                f"regulator iteration did not reach tol={tol} in {max_iter} steps "
                f"(last increment {step!r})"
            )
        r_next = positive_part(Q.apply_transpose(r) - z)
        step = sup_norm(r_next - r)
        r = r_next
        it += 1
    # then polish towards the floating-point fixed point; never an error
    for _ in range(polish_iters(q)):
        if step == 0.0:
            break
        r_next = positive_part(Q.apply_transpose(r) - z)
        step = sup_norm(r_next - r)
        r = r_next
        it += 1
    residual = sup_norm(r - positive_part(Q.apply_transpose(r) - z))
    return ProjectionResult(
        z_in=z, pi=z + Q.reflect(r), r_bar=r, iterations=it, residual=residual
    )


def project(Q: ReflectionMatrix, z, tol: float = DEFAULT_TOL) -> np.ndarray:
    return project_fixed_point(Q, z, tol).pi


def z_sequence(Q: ReflectionMatrix, z, steps: int) -> list[np.ndarray]:
    """``z_0 = z``, ``z_{m+1} = z_m + (I - Q^T)[-z_m]^+``."""
    zm = as_vector(z, Q.d)
    out = [zm]
    for _ in range(steps):
        zm = zm + Q.reflect(positive_part(-zm))
        out.append(zm)
    return out


def z_sequence_cumulative(Q: ReflectionMatrix, z, steps: int) -> list[np.ndarray]:
    """Same sequence via ``z_{m+1} = z + (I - Q^T) sum_{i<=m} [-z_i]^+``."""
    z = as_vector(z, Q.d)
    pushed = np.zeros_like(z)
    out = [z]
    for _ in range(steps):
        pushed = pushed + positive_part(-out[-1])
        out.append(z + Q.reflect(pushed))
    return out


def z_bar_sequence(Q: ReflectionMatrix, z, steps: int) -> list[np.ndarray]:
    """``z_bar_m = z + (I - Q^T) r_m`` with ``r_0 = 0``, ``r_{m+1} = [Q^T r_m - z]^+``."""
    z = as_vector(z, Q.d)
    r = np.zeros_like(z)
    out = [z]
    for _ in range(steps):
        r = positive_part(Q.apply_transpose(r) - z)
        out.append(z + Q.reflect(r))
    return out


def verify_lemma1(Q: ReflectionMatrix, z, steps: int) -> float:
    """Largest sup-norm gap between the two projection sequences over ``m <= steps``."""
    zs = z_sequence(Q, z, steps)
    zbars = z_bar_sequence(Q, z, steps)
    return max(sup_norm(a - b) for a, b in zip(zs, zbars))
