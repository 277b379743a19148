"""Reflection matrices and the vector primitives shared by every solver.

Reflection at the face ``{x_j = 0}`` of the orthant pushes in the direction
of the j-th column of ``I - Q^T``.  Throughout the package vectors are rows,
so ``Q^T u`` is computed as ``u @ Q``; this also works unchanged on stacks of
vectors with shape ``(..., d)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from os import PathLike

import numpy as np

from .errors import (
    ConfigParse,
    DimensionMismatch,
    NegativeEntry,
    NonzeroDiagonal,
    NormNotSubunit,
    OrthantReflectError,
)


@dataclass(frozen=True)
class ReflectionMatrix:
    """A validated nonnegative ``d x d`` matrix with zero diagonal.

    Build instances with :func:`validate_matrix`; the constructor itself does
    not check anything.  ``col_norm`` is the induced sup-norm of ``Q^T`` and is
    the contraction factor used in every bound.
    """

    q: np.ndarray
    row_norm: float
    col_norm: float
    d: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "d", int(self.q.shape[0]))

    def apply_transpose(self, u: np.ndarray) -> np.ndarray:
        """``Q^T u`` for a vector or a stack of row vectors."""
        return np.asarray(u, dtype=float) @ self.q

    def reflect(self, r: np.ndarray) -> np.ndarray:
        """``(I - Q^T) r`` for a vector or a stack of row vectors."""
        r = np.asarray(r, dtype=float)
        return r - r @ self.q

    def __eq__(self, other):
        if not isinstance(other, ReflectionMatrix):
            return NotImplemented
        return np.array_equal(self.q, other.q)

    def __hash__(self):
        return hash(self.q.tobytes())


def validate_matrix(raw) -> ReflectionMatrix:
    q = np.array(raw, dtype=float)
    if q.ndim == 0:
        q = q.reshape(1, 1)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
        raise DimensionMismatch(f"reflection matrix must be square, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        i, j = np.argwhere(~np.isfinite(q))[0]
        raise OrthantReflectError(f"non-finite entry q[{i}][{j}] = {q[i, j]}")
    if np.any(q < 0):
        i, j = np.argwhere(q < 0)[0]
        raise NegativeEntry(f"negative entry q[{i}][{j}] = {q[i, j]}")
    diag = np.diag(q)
    if np.any(diag != 0):
        i = int(np.flatnonzero(diag)[0])
        raise NonzeroDiagonal(f"nonzero diagonal entry q[{i}][{i}] = {q[i, i]}")
    row_norm = float(q.sum(axis=1).max())
    col_norm = float(q.sum(axis=0).max())
    if row_norm >= 1:
        raise NormNotSubunit(f"row_norm(Q) = {row_norm!r} is not < 1")
    if col_norm >= 1:
        raise NormNotSubunit(f"col_norm(Q) = {col_norm!r} is not < 1")
    q.setflags(write=False)
    return ReflectionMatrix(q=q, row_norm=row_norm, col_norm=col_norm)


def positive_part(z) -> np.ndarray:
    return np.maximum(np.asarray(z, dtype=float), 0.0)


def sup_norm(z) -> float:
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        return 0.0
    return float(np.max(np.abs(z)))


def in_orthant(z, tol: float = 0.0) -> bool:
    return bool(np.all(np.asarray(z, dtype=float) >= -tol))


def as_vector(z, d: int | None = None) -> np.ndarray:
    """Coerce to a finite 1-d float array, optionally checking its length."""
    v = np.atleast_1d(np.asarray(z, dtype=float))
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {v.shape}")
    if d is not None and v.shape[0] != d:
        raise DimensionMismatch(f"expected a vector of length {d}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise OrthantReflectError(f"non-finite vector entries: {v}")
    return v


# Matrix text format: first line d, then d whitespace-separated rows.

def parse_matrix_text(text: str, source: str = "<string>") -> ReflectionMatrix:
    lines = [
        (lineno, line.split("#", 1)[0].strip())
        for lineno, line in enumerate(text.splitlines(), start=1)
    ]
    lines = [(lineno, line) for lineno, line in lines if line]
    if not lines:
        raise ConfigParse(f"{source}: empty matrix file")
    lineno, head = lines[0]
    try:
        d = int(head)
    except ValueError:
        raise ConfigParse(f"{source}:{lineno}: expected dimension d, got {head!r}") from None
    if d < 1:
        raise ConfigParse(f"{source}:{lineno}: dimension must be positive, got {d}")
    rows = lines[1:]
    if len(rows) != d:
        raise ConfigParse(f"{source}: expected {d} matrix rows, found {len(rows)}")
    q = np.empty((d, d))
    for i, (lineno, line) in enumerate(rows):
        fields = line.split()
        if len(fields) != d:
            raise ConfigParse(
                f"{source}:{lineno}: row {i} has {len(fields)} entries, expected {d}"
            )
        for j, tok in enumerate(fields):
            try:
                q[i, j] = float(tok)
            except ValueError:
                raise ConfigParse(
                    f"{source}:{lineno}: row {i}, column {j}: cannot parse {tok!r}"
                ) from None
    try:
        return validate_matrix(q)
    except (NegativeEntry, NonzeroDiagonal, NormNotSubunit) as exc:
        raise type(exc)(f"{source}: {exc}") from None


def read_matrix(path: str | PathLike) -> ReflectionMatrix:
    with open(path, encoding="utf-8") as fh:
        return parse_matrix_text(fh.read(), source=str(path))


def format_matrix(q: ReflectionMatrix) -> str:
    rows = [" ".join(format(float(v), ".17g") for v in row) for row in q.q]
    return "\n".join([str(q.d), *rows]) + "\n"
