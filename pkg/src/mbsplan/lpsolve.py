"""Small dense linear-program solver: two-phase primal simplex, Bland's rule.

Built for the allocation problem's modest sizes (some tens to hundreds of
variables), where determinism matters more than speed: entering variable is
the lowest eligible index, ratio-test ties break on the lowest basic
variable index, so the same input bits always yield the same output bits.

All variables carry finite lower bounds (shifted to zero internally); upper
bounds become explicit rows. Infeasibility is certified by a positive
phase-1 optimum, unboundedness by an all-nonpositive entering column.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_RC_TOL = 1e-10       # reduced cost must be below -_RC_TOL to enter
_PIVOT_TOL = 1e-12    # smallest acceptable pivot magnitude
_ITERATION_CAP = 50000


class NumericalBreakdown(ArithmeticError):
    """Pivots fell below tolerance or the iteration cap was hit."""


def _matrix(value, n_vars, name):
    if value is None:
        return np.zeros((0, n_vars))
    arr = np.asarray(value, dtype=float)
    if arr.size == 0:
        return np.zeros((0, n_vars))
    if arr.ndim != 2 or arr.shape[1] != n_vars:
        raise ValueError(f"{name} must have shape (rows, {n_vars}), got {arr.shape}")
    return arr


def _vector(value, rows, name):
    if value is None:
        return np.zeros(0)
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.shape != (rows,):
        raise ValueError(f"{name} must have shape ({rows},), got {arr.shape}")
    return arr


@dataclass
class LinearProgram:
    """minimize c @ x  s.t.  a_eq x = b_eq,  a_ub x <= b_ub,  lo <= x <= hi.

    Lower bounds must be finite (all variables in this package are
    nonnegative); upper bounds may be +inf.
    """

    objective: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    bounds: list = field(default_factory=list)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.objective, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ValueError(f"objective must be a non-empty vector, got shape {c.shape}")
        n = c.size
        a_eq = _matrix(self.a_eq, n, "a_eq")
        b_eq = _vector(self.b_eq, a_eq.shape[0], "b_eq")
        a_ub = _matrix(self.a_ub, n, "a_ub")
        b_ub = _vector(self.b_ub, a_ub.shape[0], "b_ub")
        bounds = list(self.bounds) if self.bounds else [(0.0, math.inf)] * n
        if len(bounds) != n:
            raise ValueError(f"bounds must list {n} (lo, hi) pairs, got {len(bounds)}")
        lo = np.array([float(b[0]) for b in bounds])
        hi = np.array([float(b[1]) for b in bounds])
        if not np.all(np.isfinite(lo)):
            raise ValueError("every lower bound must be finite")
        if np.any(lo > hi):
            bad = int(np.argmax(lo > hi))
            raise ValueError(f"bounds[{bad}]: lower bound {lo[bad]} exceeds upper {hi[bad]}")
        for name, arr in (("objective", c), ("a_eq", a_eq), ("b_eq", b_eq),
                          ("a_ub", a_ub), ("b_ub", b_ub)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        self.objective = c
        self.a_eq, self.b_eq = a_eq, b_eq
        self.a_ub, self.b_ub = a_ub, b_ub
        self.bounds = [(float(l), float(h)) for l, h in zip(lo, hi)]
        self._lo, self._hi = lo, hi

    @property
    def n_vars(self) -> int:
        return self.objective.size


@dataclass
class LpSolution:
    status: str
    variables: np.ndarray | None
    objective_value: float | None


def _pivot(T, basis, row, col):
    pivot = T[row, col]
    if abs(pivot) <= _PIVOT_TOL:
        raise NumericalBreakdown(
            f"pivot {pivot:.3e} at row {row}, column {col} is below "
            f"the {_PIVOT_TOL:.0e} tolerance"
        )
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])
    basis[row] = col


def _run_simplex(T, basis, n_enterable, phase, verbose):
    """Minimize the objective encoded in T's last row over columns
    [0, n_enterable); returns OPTIMAL or UNBOUNDED."""
    for iteration in range(_ITERATION_CAP):
        reduced = T[-1, :n_enterable]
        candidates = np.nonzero(reduced < -_RC_TOL)[0]
        if candidates.size == 0:
            return OPTIMAL
        col = int(candidates[0])  # Bland: lowest index
        column = T[:-1, col]
        # Entries at or below the pivot tolerance count as zero, so a column
        # with no usable entry is a certified improving ray.
        usable = column > _PIVOT_TOL
        if not np.any(usable):
            return UNBOUNDED
        ratios = np.where(usable, T[:-1, -1] / np.where(usable, column, 1.0), math.inf)
        best = ratios.min()
        tied = np.nonzero(ratios <= best)[0]
        row = int(tied[np.argmin(np.asarray(basis)[tied])])  # Bland tie-break
        if verbose:
            print(f"phase {phase} iter {iteration}: col {col} enters, "
                  f"var {basis[row]} leaves (ratio {best:.6g})")
        _pivot(T, basis, row, col)
    raise NumericalBreakdown(f"phase {phase}: iteration cap {_ITERATION_CAP} exceeded")


def solve_lp(lp: LinearProgram, verbose: bool = False) -> LpSolution:
    """Solve the program; statuses are ``optimal``, ``infeasible`` or
    ``unbounded``. Deterministic: identical inputs give identical outputs."""
    n = lp.n_vars
    lo, hi = lp._lo, lp._hi

    # Shift every variable down by its lower bound, then collect rows:
    # equalities first, inequalities after, finite upper bounds as unit rows.
    rows = [lp.a_eq, lp.a_ub]
    rhs = [lp.b_eq - lp.a_eq @ lo, lp.b_ub - lp.a_ub @ lo]
    finite_ub = np.nonzero(np.isfinite(hi))[0]
    if finite_ub.size:
        unit = np.zeros((finite_ub.size, n))
        unit[np.arange(finite_ub.size), finite_ub] = 1.0
        rows.append(unit)
        rhs.append(hi[finite_ub] - lo[finite_ub])
    A = np.vstack(rows)
    b = np.concatenate(rhs)
    m_eq = lp.a_eq.shape[0]
    m = A.shape[0]
    m_ub = m - m_eq

    # Slack columns for inequality rows; flip rows to nonnegative rhs.
    slacks = np.zeros((m, m_ub))
    slacks[np.arange(m_eq, m), np.arange(m_ub)] = 1.0
    flip = b < 0.0
    A[flip] *= -1.0
    b[flip] *= -1.0
    slacks[flip] *= -1.0

    # Artificials for equality rows and flipped inequality rows.
    needs_art = np.ones(m, dtype=bool)
    needs_art[m_eq:] = flip[m_eq:]
    art_rows = np.nonzero(needs_art)[0]
    n_struct = n + m_ub
    n_total = n_struct + art_rows.size
    T = np.zeros((m + 1, n_total + 1))
    T[:m, :n] = A
    T[:m, n:n_struct] = slacks
    T[art_rows, n_struct + np.arange(art_rows.size)] = 1.0
    T[:m, -1] = b

    basis = [0] * m
    for i in range(m):
        basis[i] = -1
    for k, i in enumerate(art_rows):
        basis[i] = n_struct + k
    slack_basic = np.nonzero(~needs_art)[0]
    for i in slack_basic:
        basis[i] = n + (i - m_eq)

    # Phase 1: minimize the artificial sum; price out the basic artificials.
    T[-1, n_struct:n_total] = 1.0
    for i in art_rows:
        T[-1] -= T[i]
    status = _run_simplex(T, basis, n_struct, phase=1, verbose=verbose)
    assert status == OPTIMAL  # phase 1 is bounded below by zero
    feas_tol = 1e-8 * (1.0 + float(np.max(np.abs(b), initial=0.0)))
    if -T[-1, -1] > feas_tol:
        return LpSolution(status=INFEASIBLE, variables=None, objective_value=None)

    # Drive leftover basic artificials out; drop genuinely redundant rows.
    drop = []
    for i in range(m):
        if basis[i] >= n_struct:
            row = T[i, :n_struct]
            nz = np.nonzero(np.abs(row) > 1e-9)[0]
            if nz.size:
                _pivot(T, basis, i, int(nz[np.argmax(np.abs(row[nz]))]))
            else:
                drop.append(i)
    if drop:
        keep = [i for i in range(m) if i not in drop]
        T = T[keep + [m]]
        basis = [basis[i] for i in keep]
        m = len(basis)

    # Phase 2 on the artificial-free tableau.
    T = np.hstack((T[:, :n_struct], T[:, -1:]))
    cost = np.zeros(n_struct + 1)
    cost[:n] = lp.objective
    T[-1] = cost
    for i in range(m):
        if T[-1, basis[i]] != 0.0:
            T[-1] -= T[-1, basis[i]] * T[i]
    status = _run_simplex(T, basis, n_struct, phase=2, verbose=verbose)
    if status == UNBOUNDED:
        return LpSolution(status=UNBOUNDED, variables=None, objective_value=None)

    shifted = np.zeros(n_struct)
    for i in range(m):
        shifted[basis[i]] = T[i, -1]
    x = shifted[:n] + lo
    return LpSolution(status=OPTIMAL, variables=x, objective_value=float(lp.objective @ x))
