"""Small dense/sparse LP surface backed by scipy's HiGHS solver.

Infeasibility is certified by an explicit elastic phase-1 pass rather than
trusting the solver's status blindly, and a sequential pass can return the
lexicographically smallest optimal point for reproducible tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

FEAS_TOL = 1e-8

LE, GE, EQ = "<=", ">=", "=="


@dataclass
class LinearProgram:
    objective: np.ndarray
    sense: str = "min"  # "min" | "max"
    rows: list = field(default_factory=list)  # (coeffs, relation, rhs)
    bounds: list = field(default_factory=list)  # (lo, hi) per variable

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if self.sense not in ("min", "max"):
            raise ValueError(f"bad sense {self.sense!r}")
        if not self.bounds:
            self.bounds = [(None, None)] * self.num_vars
        if len(self.bounds) != self.num_vars:
            raise ValueError("bounds length != variable count")

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    def add_row(self, coeffs, relation: str, rhs: float) -> None:
        if relation not in (LE, GE, EQ):
            raise ValueError(f"bad relation {relation!r}")
        self.rows.append((np.asarray(coeffs, dtype=float), relation, float(rhs)))


@dataclass
class LPSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective_value: float | None = None
    infeasibility_gap: float | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _split_rows(lp: LinearProgram, use_sparse: bool):
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for coeffs, rel, rhs in lp.rows:
        if rel == LE:
            a_ub.append(coeffs)
            b_ub.append(rhs)
        elif rel == GE:
            a_ub.append(-coeffs)
            b_ub.append(-rhs)
        else:
            a_eq.append(coeffs)
            b_eq.append(rhs)

    def pack(rows):
        if not rows:
            return None
        mat = np.vstack(rows)
        return sp.csr_matrix(mat) if use_sparse else mat

    return pack(a_ub), (np.array(b_ub) if b_ub else None), pack(a_eq), (
        np.array(b_eq) if b_eq else None
    )


def lp_solve(lp: LinearProgram, certify: bool = True) -> LPSolution:
    """Solve the LP; on infeasibility optionally attach the phase-1 gap."""
    if not np.all(np.isfinite(lp.objective)):
        raise ValueError("objective has non-finite coefficients")
    for coeffs, _rel, rhs in lp.rows:
        if not (np.all(np.isfinite(coeffs)) and np.isfinite(rhs)):
            raise ValueError("constraint has non-finite coefficients")

    use_sparse = lp.num_vars > 5000
    c = lp.objective if lp.sense == "min" else -lp.objective
    a_ub, b_ub, a_eq, b_eq = _split_rows(lp, use_sparse)
    res = linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
        bounds=lp.bounds, method="highs",
    )
    if res.status == 0:
        value = float(res.fun) if lp.sense == "min" else -float(res.fun)
        return LPSolution("optimal", np.asarray(res.x), value)
    if res.status == 3:
        return LPSolution("unbounded")
    if res.status == 2:
        gap = _phase1_gap(lp) if certify else None
        if gap is not None and gap <= FEAS_TOL:
            # solver called it infeasible but the elastic pass (nearly)
            # closes: treat as a tolerance-level feasibility
            raise ArithmeticError(
                f"solver reported infeasible but phase-1 gap is {gap:.3e}"
            )
        return LPSolution("infeasible", infeasibility_gap=gap)
    raise ArithmeticError(f"LP solve failed with status {res.status}: {res.message}")


def _phase1_gap(lp: LinearProgram) -> float:
    """Minimum total constraint violation; > FEAS_TOL certifies infeasibility."""
    n = lp.num_vars
    slack_count = sum(2 if rel == EQ else 1 for _c, rel, _r in lp.rows)
    if slack_count == 0:
        return 0.0
    rows, rhs_ub, erows, rhs_eq = [], [], [], []
    k = 0
    for coeffs, rel, rhs in lp.rows:
        ext = np.zeros(n + slack_count)
        ext[:n] = coeffs
        if rel == LE:
            ext[n + k] = -1.0
            rows.append(ext)
            rhs_ub.append(rhs)
            k += 1
        elif rel == GE:
            ext[n + k] = 1.0
            rows.append(-ext)
            rhs_ub.append(-rhs)
            k += 1
        else:
            ext[n + k] = 1.0
            ext[n + k + 1] = -1.0
            erows.append(ext)
            rhs_eq.append(rhs)
            k += 2
    c = np.zeros(n + slack_count)
    c[n:] = 1.0
    bounds = list(lp.bounds) + [(0, None)] * slack_count
    res = linprog(
        c,
        A_ub=np.vstack(rows) if rows else None,
        b_ub=np.array(rhs_ub) if rhs_ub else None,
        A_eq=np.vstack(erows) if erows else None,
        b_eq=np.array(rhs_eq) if rhs_eq else None,
        bounds=bounds, method="highs",
    )
    if res.status != 0:
        raise ArithmeticError(f"phase-1 LP failed with status {res.status}")
    return float(res.fun)


def lp_solve_lexicographic(lp: LinearProgram, band: float = 1e-9) -> LPSolution:
    """Lexicographically smallest optimal point (first coordinate minimized
    first, then the second on the remaining face, and so on).

    Runs of coordinates that can sit at their lower bound simultaneously are
    fixed in one shot: if min sum(x_i - lb_i) over a prefix is 0, every term
    is 0, so the whole prefix is lex-minimal at lb. Bisection then finds the
    first coordinate forced above its bound, which is minimized individually.
    Coordinates are pinned within `band` of their lex value via bounds.
    """
    base = lp_solve(lp)
    if not base.optimal:
        return base
    n = lp.num_vars
    use_sparse = n > 5000
    a_ub, b_ub, a_eq, b_eq = _split_rows(lp, use_sparse)
    band_row = lp.objective if lp.sense == "min" else -np.asarray(lp.objective)
    band_rhs = (base.objective_value + band) if lp.sense == "min" else (
        -base.objective_value + band
    )
    if a_ub is None:
        a_ub, b_ub = np.atleast_2d(np.asarray(band_row, float)), np.array([band_rhs])
    else:
        stack = sp.vstack if use_sparse else np.vstack
        a_ub = stack([a_ub, np.atleast_2d(np.asarray(band_row, float))])
        b_ub = np.concatenate([b_ub, [band_rhs]])
    bounds = list(lp.bounds)

    def solve(c):
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                      bounds=bounds, method="highs")
        return res if res.status == 0 else None

    def prefix_zeroable(k, m) -> tuple[bool, np.ndarray | None]:
        c = np.zeros(n)
        c[k:m] = 1.0
        res = solve(c)
        if res is None:
            return False, None
        floor = sum(bounds[i][0] for i in range(k, m))
        return res.fun <= floor + band * max(1, m - k), res.x

    x = np.asarray(base.x).copy()
    k = 0
    while k < n:
        if bounds[k][0] is None:
            e = np.zeros(n)
            e[k] = 1.0
            res = solve(e)
            if res is None:
                break
            bounds[k] = (None, float(res.fun) + band)
            x = np.asarray(res.x).copy()
            k += 1
            continue
        ok, sol = prefix_zeroable(k, n)
        if ok:
            for i in range(k, n):
                bounds[i] = (bounds[i][0], bounds[i][0] + band)
            x = sol
            break
        lo, hi = k, n  # prefix [k, lo) zeroable, [k, hi) not
        while hi - lo > 1:
            mid = (lo + hi) // 2
            ok, sol = prefix_zeroable(k, mid)
            if ok:
                lo = mid
                if sol is not None:
                    x = sol
            else:
                hi = mid
        for i in range(k, lo):
            bounds[i] = (bounds[i][0], bounds[i][0] + band)
        e = np.zeros(n)
        e[lo] = 1.0
        res = solve(e)
        if res is None:
            break
        bounds[lo] = (bounds[lo][0], float(res.fun) + band)
        x = np.asarray(res.x).copy()
        k = lo + 1

    final = solve(np.asarray(lp.objective, float) * (1.0 if lp.sense == "min" else -1.0))
    if final is not None:
        x = np.asarray(final.x).copy()
    return LPSolution("optimal", x, base.objective_value)
