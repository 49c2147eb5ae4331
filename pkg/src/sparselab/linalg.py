"""Cholesky-based linear algebra for active-set computations.

Every application of (A_I^T A_I)^{-1} in this package goes through a
Cholesky solve; explicit matrix inversion is never used.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

__all__ = ["RankDeficiencyError", "gram_solve", "ActiveCholesky"]


class RankDeficiencyError(RuntimeError):
    """An active sub-matrix A_I has (numerically) deficient column rank."""


def gram_solve(a_sub: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve (A_I^T A_I) z = rhs via Cholesky.

    Raises RankDeficiencyError when the Gram matrix is not numerically
    positive definite.
    """
    if a_sub.shape[1] == 0:
        return np.zeros((0,) + np.shape(rhs)[1:])
    gram = a_sub.T @ a_sub
    try:
        c = cho_factor(gram, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError(f"Gram matrix of shape {gram.shape} is singular") from exc
    return cho_solve(c, rhs, check_finite=False)


class ActiveCholesky:
    """Lower Cholesky factor of A_J^T A_J maintained under insert/remove.

    Inserting appends a column at the end of the active set; removing deletes
    an arbitrary position and re-triangularizes the trailing block with Givens
    rotations.  When the running condition estimate (squared ratio of extreme
    factor diagonals) exceeds ``refactor_threshold``, the caller-supplied Gram
    matrix is refactored from scratch instead of updated.
    """

    def __init__(self, refactor_threshold: float = 1e8):
        self._l = np.zeros((0, 0))
        self.refactor_threshold = float(refactor_threshold)

    @property
    def size(self) -> int:
        return self._l.shape[0]

    def copy(self) -> "ActiveCholesky":
        out = ActiveCholesky(self.refactor_threshold)
        out._l = self._l.copy()
        return out

    def condition_estimate(self) -> float:
        if self.size == 0:
            return 1.0
        d = np.abs(np.diag(self._l))
        return float((d.max() / d.min()) ** 2)

    def insert(self, cross: np.ndarray, diag: float) -> None:
        """Append the active column whose Gram row is (cross, diag).

        ``cross`` is A_J^T a_new for the current active set J, ``diag`` is
        ||a_new||^2.
        """
        m = self.size
        if m == 0:
            if diag <= 0:
                raise RankDeficiencyError("non-positive column norm")
            self._l = np.array([[np.sqrt(diag)]])
            return
        w = solve_triangular(self._l, cross, lower=True, check_finite=False)
        d2 = diag - w @ w
        # relative tolerance keeps scale invariance; a dependent column gives d2 <= 0
        if d2 <= 1e-14 * diag:
            raise RankDeficiencyError("new active column is numerically dependent")
        new = np.zeros((m + 1, m + 1))
        new[:m, :m] = self._l
        new[m, :m] = w
        new[m, m] = np.sqrt(d2)
        self._l = new

    def remove(self, idx: int) -> None:
        """Remove the active column at position ``idx``."""
        m = self.size
        if not 0 <= idx < m:
            raise IndexError(idx)
        l = np.delete(self._l, idx, axis=0)
        # rows idx..m-2 now carry one superdiagonal entry each; chase it away
        for j in range(idx, m - 1):
            a, b = l[j, j], l[j, j + 1]
            r = np.hypot(a, b)
            if r == 0:
                raise RankDeficiencyError("zero pivot while downdating")
            c, s = a / r, b / r
            cols = l[j:, (j, j + 1)]
            l[j:, j] = cols @ (c, s)
            l[j:, j + 1] = cols @ (-s, c)
            l[j, j] = r
            l[j, j + 1] = 0.0
        self._l = l[:, : m - 1]
        if self.size and np.any(np.diag(self._l) <= 0):
            # Givens keeps diagonals positive up to sign flips we applied; a
            # nonpositive pivot means the factor degenerated numerically.
            raise RankDeficiencyError("downdating produced a nonpositive pivot")

    def refactor(self, gram: np.ndarray) -> None:
        try:
            self._l = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError as exc:
            raise RankDeficiencyError("active Gram matrix is singular") from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve (A_J^T A_J) z = rhs using the current factor."""
        if self.size == 0:
            return np.zeros_like(np.atleast_1d(rhs))
        z = solve_triangular(self._l, rhs, lower=True, check_finite=False)
        return solve_triangular(self._l.T, z, lower=False, check_finite=False)
