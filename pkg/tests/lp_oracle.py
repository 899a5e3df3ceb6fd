"""Brute-force LP reference used by the solver tests.

Instances built by :func:`random_instance` put a finite box around every
variable, so the feasible set (when non-empty) is a polytope: its optimum
sits at a vertex, and a vertex is any nonsingular choice of n active
constraints. Enumerating every such choice is exponential but fine at the
test sizes (n <= 5), and shares no code with the simplex under test.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

FEAS_TOL = 1e-7


def enumerate_optimum(c, a_eq, b_eq, a_ub, b_ub, bounds):
    """Return ("optimal", best objective) or ("infeasible", None).

    Requires finite lower and upper bounds on every variable so that
    unbounded problems cannot arise.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    assert np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))

    a_eq = np.zeros((0, n)) if a_eq is None else np.asarray(a_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    a_ub = np.zeros((0, n)) if a_ub is None else np.asarray(a_ub, dtype=float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)

    # Optional active-constraint pool: inequality rows plus both box faces.
    pool_rows = [a_ub]
    pool_rhs = [b_ub]
    eye = np.eye(n)
    pool_rows += [eye, eye]
    pool_rhs += [lo, hi]
    pool_a = np.vstack(pool_rows)
    pool_b = np.concatenate(pool_rhs)

    m_eq = a_eq.shape[0]
    need = n - m_eq
    if need < 0:
        # Over-determined equality system; solve by least squares and check.
        x, *_ = np.linalg.lstsq(a_eq, b_eq, rcond=None)
        if _feasible(x, a_eq, b_eq, a_ub, b_ub, lo, hi):
            return "optimal", float(c @ x)
        return "infeasible", None

    combos = list(combinations(range(pool_a.shape[0]), need))
    if not combos:
        combos = [()]
    mats = np.empty((len(combos), n, n))
    rhs = np.empty((len(combos), n))
    mats[:, :m_eq] = a_eq
    rhs[:, :m_eq] = b_eq
    for i, combo in enumerate(combos):
        idx = list(combo)
        mats[i, m_eq:] = pool_a[idx]
        rhs[i, m_eq:] = pool_b[idx]

    dets = np.abs(np.linalg.det(mats))
    scale = np.maximum(1.0, np.abs(mats).max(axis=(1, 2)) ** n)
    usable = dets > 1e-9 * scale
    best = None
    if usable.any():
        solutions = np.linalg.solve(mats[usable], rhs[usable][..., np.newaxis])[..., 0]
        for x in solutions:
            if _feasible(x, a_eq, b_eq, a_ub, b_ub, lo, hi):
                value = float(c @ x)
                if best is None or value < best:
                    best = value
    if best is None:
        return "infeasible", None
    return "optimal", best


def _feasible(x, a_eq, b_eq, a_ub, b_ub, lo, hi):
    if a_eq.size and np.max(np.abs(a_eq @ x - b_eq)) > FEAS_TOL * (1.0 + np.abs(b_eq).max()):
        return False
    if a_ub.size and np.max(a_ub @ x - b_ub) > FEAS_TOL * (1.0 + np.abs(b_ub).max()):
        return False
    return bool(np.all(x >= lo - FEAS_TOL) and np.all(x <= hi + FEAS_TOL))


def random_instance(rng):
    """Small integer-coefficient LP inside a finite box, per the test contract
    (<= 8 variables, <= 8 constraints, coefficients in [-5, 5])."""
    n = int(rng.integers(1, 6))
    m_eq = int(rng.integers(0, min(3, n + 1)))
    m_ub = int(rng.integers(0, 5))
    c = rng.integers(-5, 6, size=n).astype(float)
    a_eq = rng.integers(-5, 6, size=(m_eq, n)).astype(float) if m_eq else None
    b_eq = rng.integers(-5, 6, size=m_eq).astype(float) if m_eq else None
    a_ub = rng.integers(-5, 6, size=(m_ub, n)).astype(float) if m_ub else None
    b_ub = rng.integers(-5, 6, size=m_ub).astype(float) if m_ub else None
    hi = rng.integers(1, 8, size=n).astype(float)
    bounds = [(0.0, float(hi[i])) for i in range(n)]
    return dict(objective=c, a_eq=a_eq, b_eq=b_eq, a_ub=a_ub, b_ub=b_ub, bounds=bounds)
