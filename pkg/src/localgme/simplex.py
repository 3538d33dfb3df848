"""Dense two-phase primal simplex (tableau form) with Bland's anti-cycling rule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    duals: np.ndarray | None = None
    basis: list[int] | None = None
    iterations: int = 0


# rebuild the tableau from the original data this often to stop error build-up
REINVERT_EVERY = 50
# among near-tied leaving rows, only pivots at least this fraction of the largest are eligible
PIVOT_QUALITY = 0.1


class _Tableau:
    def __init__(self, a: np.ndarray, b: np.ndarray, basis: list[int], tol: float):
        self.a0 = np.array(a, dtype=float)
        self.b0 = np.array(b, dtype=float)
        self.t = np.hstack([self.a0, self.b0[:, None]])
        self.basis = list(basis)
        self.tol = tol
        self.iterations = 0

    def restrict(self, rows: list[int], n_cols: int) -> None:
        """Keep only the given rows and the first ``n_cols`` columns."""
        self.a0 = self.a0[rows, :n_cols]
        self.b0 = self.b0[rows]
        self.t = np.hstack([self.t[rows, :n_cols], self.t[rows, -1:]])
        self.basis = [self.basis[r] for r in rows]

    def reinvert(self) -> None:
        try:
            self.t = np.linalg.solve(self.a0[:, self.basis], np.hstack([self.a0, self.b0[:, None]]))
        except np.linalg.LinAlgError:
            return  # keep the updated tableau; the final residual check still applies
        rhs = self.t[:, -1]
        rhs[(rhs < 0) & (rhs > -self.tol)] = 0.0

    @property
    def rhs(self) -> np.ndarray:
        return self.t[:, -1]

    def pivot(self, row: int, col: int) -> None:
        t = self.t
        t[row] /= t[row, col]
        colv = t[:, col].copy()
        colv[row] = 0.0
        t -= np.outer(colv, t[row])
        self.basis[row] = col
        self.iterations += 1
        rhs = t[:, -1]
        rhs[(rhs < 0) & (rhs > -self.tol)] = 0.0
        if self.iterations % REINVERT_EVERY == 0:
            self.reinvert()

    def run(self, cost: np.ndarray, allowed: np.ndarray, max_iter: int) -> str:
        """Maximize ``cost @ x`` from the current basic feasible solution."""
        tol = self.tol
        while True:
            t = self.t  # reinversion replaces the array
            if self.iterations >= max_iter:
                raise SolverError(f"simplex hit the iteration cap ({max_iter})")
            reduced = cost - cost[self.basis] @ t[:, :-1]
            candidates = np.flatnonzero((reduced > tol) & allowed)
            if candidates.size == 0:
                return OPTIMAL
            col = int(candidates[0])  # Bland: lowest index
            column = t[:, col]
            positive = column > tol
            if not positive.any():
                return UNBOUNDED
            # Harris two-pass ratio test: bound the step with relaxed ratios, then
            # prefer well-sized pivots; Bland's lowest basic index breaks ties
            rhs = np.maximum(t[:, -1], 0.0)
            relaxed = np.full(column.shape, np.inf)
            relaxed[positive] = (rhs[positive] + tol) / column[positive]
            step = relaxed.min()
            ratios = np.full(column.shape, np.inf)
            ratios[positive] = rhs[positive] / column[positive]
            tied = np.flatnonzero(ratios <= step)
            big = column[tied].max()
            tied = tied[column[tied] >= PIVOT_QUALITY * big]
            row = int(min(tied, key=lambda r: self.basis[r]))
            self.pivot(row, col)


def solve(c: np.ndarray, a_eq: np.ndarray, b_eq: np.ndarray, tol: float = 1e-9,
          max_iter: int = 200_000) -> LPResult:
    """Maximize ``c @ x`` subject to ``a_eq @ x = b_eq``, ``x >= 0``.

    Redundant equality rows are detected after phase one and dropped; their
    dual values are reported as zero.
    """
    a = np.array(a_eq, dtype=float)
    b = np.array(b_eq, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = a.shape
    flip = b < 0
    a[flip] *= -1
    b[flip] *= -1
    sign = np.where(flip, -1.0, 1.0)

    # phase one: artificial identity basis, maximize -sum(artificials)
    tab = _Tableau(np.hstack([a, np.eye(m)]), b, list(range(n, n + m)), tol)
    cost1 = np.concatenate([np.zeros(n), -np.ones(m)])
    tab.run(cost1, np.ones(n + m, dtype=bool), max_iter)
    scale = max(1.0, float(np.abs(b).max(initial=0.0)))
    if tab.rhs[[i for i, j in enumerate(tab.basis) if j >= n]].sum() > tol * scale * 10:
        return LPResult(INFEASIBLE, iterations=tab.iterations)

    # drive zero-level artificials out of the basis; rows that cannot be pivoted are redundant
    keep_rows = []
    for row in range(m):
        if tab.basis[row] >= n:
            entries = np.abs(tab.t[row, :n])
            cols = np.flatnonzero(entries > tol)
            if cols.size:
                tab.pivot(row, int(cols[np.argmax(entries[cols])]))
                keep_rows.append(row)
        else:
            keep_rows.append(row)
    tab.restrict(keep_rows, n)

    status = tab.run(c, np.ones(n, dtype=bool), max_iter)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, iterations=tab.iterations)
    tab.reinvert()  # read the solution off the final basis, not the updated tableau
    if status == OPTIMAL and tab.run(c, np.ones(n, dtype=bool), max_iter) == UNBOUNDED:
        return LPResult(UNBOUNDED, iterations=tab.iterations)
    x = np.zeros(n)
    x[tab.basis] = tab.rhs
    x[np.abs(x) < tol * 1e-3] = 0.0

    basis_matrix = a[np.ix_(keep_rows, tab.basis)]
    try:
        y_kept = np.linalg.solve(basis_matrix.T, c[tab.basis])
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(basis_matrix)
        raise SolverError(f"singular final basis (condition number {cond:.3e})") from exc
    y = np.zeros(m)
    y[keep_rows] = y_kept
    y *= sign
    resid = np.max(np.abs(a_eq @ x - b_eq), initial=0.0)
    if resid > 1e3 * tol * scale:
        cond = np.linalg.cond(basis_matrix)
        raise SolverError(f"primal residual {resid:.3e} too large (basis condition number {cond:.3e})")
    return LPResult(OPTIMAL, x, float(c @ x), y, list(tab.basis), tab.iterations)
