"""Sparse direct solves of the monolithic step systems."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DENSE_LIMIT = 2000
_REFINEMENT_STEPS = 3


class SolverError(RuntimeError):
    """A solve failed or did not reach the requested residual."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass
class LinearSystem:
    """One implicit step: matrix, right-hand side and field index ranges.

    Attributes
    ----------
    matrix : scipy.sparse.csr_matrix
    rhs : ndarray
    layout : dict
        Field name to ``slice`` of the unknown vector.
    constrained : ndarray
        Global indices of identity rows.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    layout: dict[str, slice] = field(default_factory=dict)
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self) -> None:
        n, m = self.matrix.shape
        if n != m:
            raise ValueError("system matrix must be square")
        if len(self.rhs) != n:
            raise ValueError("rhs length does not match the matrix")

    def split(self, x: np.ndarray) -> dict[str, np.ndarray]:
        """Slice a solution vector into named fields."""
        return {name: x[sl].copy() for name, sl in self.layout.items()}


def relative_residual(matrix, x: np.ndarray, b: np.ndarray) -> float:
    """``|A x - b| / |b|``, or the absolute residual when ``b = 0``."""
    r = np.linalg.norm(matrix @ x - b)
    nb = np.linalg.norm(b)
    return float(r / nb) if nb > 0 else float(r)


class Factorization:
    """Reusable sparse LU factorization with residual checking.

    SuperLU with the COLAMD ordering is deterministic, so repeated solves with
    the same inputs are bitwise identical. A few steps of iterative refinement
    are taken if the first residual misses ``tol``.
    """

    def __init__(self, matrix: sp.spmatrix, tol: float = DEFAULT_TOL):
        self.matrix = sp.csc_matrix(matrix)
        self.tol = tol
        try:
            self._lu = spla.splu(self.matrix, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"sparse LU failed: {exc}") from None

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        x = self._lu.solve(b)
        res = relative_residual(self.matrix, x, b)
        for _ in range(_REFINEMENT_STEPS):
            if res <= self.tol or not np.isfinite(res):
                break
            x = x + self._lu.solve(b - self.matrix @ x)
            res = relative_residual(self.matrix, x, b)
        if not np.isfinite(res) or res > self.tol:
            raise SolverError("solve did not reach tolerance", res)
        return x


def solve(system: LinearSystem, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Solve ``system`` to relative residual ``tol``.

    Raises
    ------
    SolverError
        On singular matrices or if refinement cannot reach ``tol``.
    """
    return Factorization(system.matrix, tol).solve(system.rhs)


def dense_solve(matrix, b: np.ndarray) -> np.ndarray:
    """Dense LU reference solve for small systems."""
    a = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix, dtype=float)
    if a.shape[0] > DENSE_LIMIT:
        raise ValueError(f"dense reference limited to dimension {DENSE_LIMIT}")
    return scipy.linalg.solve(a, b)
