"""Dense linear algebra for small fixed dimensions (n <= 12).

Gaussian elimination with partial pivoting plus Gram-Schmidt
re-orthonormalization; no SVD.  All returned bases are orthonormal so that
projection residuals are basis-independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TOL_RANK = 1e-12


class SingularMatrix(Exception):
    """Square solve hit a pivot below the rank tolerance."""


@dataclass(frozen=True)
class SubspaceBasis:
    """A subspace of R^ambient_dim spanned by the columns of `columns`.

    Columns must be linearly independent; rank equals the column count.
    """

    ambient_dim: int
    columns: np.ndarray = field()  # shape (ambient_dim, k)

    def __post_init__(self):
        cols = np.atleast_2d(np.asarray(self.columns, dtype=float))
        if cols.size == 0:
            cols = cols.reshape(self.ambient_dim, 0)
        object.__setattr__(self, "columns", cols)
        if cols.shape[0] != self.ambient_dim:
            raise ValueError(
                f"column length {cols.shape[0]} != ambient dim {self.ambient_dim}"
            )
        if not np.all(np.isfinite(cols)):
            raise ValueError("basis columns must be finite")

    @property
    def dim(self) -> int:
        return self.columns.shape[1]


def solve_linear(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve Ax = b for square A by Gaussian elimination with partial pivoting.

    Raises SingularMatrix when a pivot falls below TOL_RANK relative to the
    largest entry seen during elimination.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("A must be square")
    if b.shape != (n,):
        raise ValueError("b length must match A")
    scale = max(np.max(np.abs(A)), 1.0)
    aug = np.hstack([A, b[:, None]])
    for k in range(n):
        p = k + int(np.argmax(np.abs(aug[k:, k])))
        if np.abs(aug[p, k]) <= TOL_RANK * scale:
            raise SingularMatrix(f"pivot {k} below tolerance")
        if p != k:
            aug[[k, p]] = aug[[p, k]]
        aug[k + 1:, k:] -= np.outer(aug[k + 1:, k] / aug[k, k], aug[k, k:])
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (aug[k, n] - aug[k, k + 1:n] @ x[k + 1:]) / aug[k, k]
    return x


def orthonormalize(cols: np.ndarray, tol: float = TOL_RANK) -> np.ndarray:
    """Orthonormal basis of the column span, by modified Gram-Schmidt.

    Columns with norm below `tol` (relative to the largest input column)
    after projection are dropped.
    """
    cols = np.atleast_2d(np.asarray(cols, dtype=float))
    if cols.shape[1] == 0:
        return cols.copy()
    scale = max(np.max(np.linalg.norm(cols, axis=0)), 1.0)
    out = []
    for j in range(cols.shape[1]):
        v = cols[:, j].copy()
        for _ in range(2):  # re-orthogonalize for stability
            for q in out:
                v -= (q @ v) * q
        nv = np.linalg.norm(v)
        if nv > tol * scale:
            out.append(v / nv)
    if not out:
        return np.zeros((cols.shape[0], 0))
    return np.column_stack(out)


def nullspace_basis(A: np.ndarray, tol: float = TOL_RANK) -> SubspaceBasis:
    """Orthonormal basis of {x : Ax = 0}, via row reduction."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = np.atleast_2d(np.array(A, dtype=float))
    m, n = A.shape
    scale = max(np.max(np.abs(A)) if A.size else 0.0, 1.0)
    R = A.copy()
    pivots = []
    row = 0
    for col in range(n):
        if row >= m:
            break
        p = row + int(np.argmax(np.abs(R[row:, col])))
        if np.abs(R[p, col]) <= tol * scale:
            continue
        if p != row:
            R[[row, p]] = R[[p, row]]
        R[row] /= R[row, col]
        mask = np.arange(m) != row
        R[mask] -= np.outer(R[mask, col], R[row])
        pivots.append(col)
        row += 1
    free = [c for c in range(n) if c not in pivots]
    vecs = np.zeros((n, len(free)))
    for j, fc in enumerate(free):
        vecs[fc, j] = 1.0
        for r, pc in enumerate(pivots):
            vecs[pc, j] = -R[r, fc]
    return SubspaceBasis(n, orthonormalize(vecs, tol))


def annihilator_basis(B: SubspaceBasis) -> SubspaceBasis:
    """Basis of {mu : mu . v = 0 for all v in span(B)}, under the dot pairing."""
    return nullspace_basis(B.columns.T.reshape(B.dim, B.ambient_dim))


def project_onto(B: SubspaceBasis, v: np.ndarray) -> np.ndarray:
    """Orthogonal projection of v onto span(B)."""
    Q = orthonormalize(B.columns)
    return Q @ (Q.T @ np.asarray(v, dtype=float))


def distance_to(B: SubspaceBasis, v: np.ndarray) -> float:
    """Euclidean distance from v to span(B)."""
    v = np.asarray(v, dtype=float)
    return float(np.linalg.norm(v - project_onto(B, v)))


def subspace_contains(B: SubspaceBasis, v: np.ndarray, tol: float = 1e-10):
    """Return (contained, residual) with residual = |v - proj_span(B)(v)|_2."""
    v = np.asarray(v, dtype=float)
    residual = distance_to(B, v)
    return residual <= tol * (1.0 + np.linalg.norm(v)), residual
