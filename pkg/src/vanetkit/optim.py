"""Dense LP machinery shared by the traffic and source-selection layers.

Two solvers live here.  ``solve_lp`` is a two-phase primal simplex with
Bland's rule, used as the exact reference for every linear program in
the package.  ``barrier_solve`` is a log-barrier path-following method
specialized to the traffic-allocation shape (nonnegativity, one demand
row, per-edge capacity rows) with the (n+E+1)/t suboptimality
certificate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

_PIVOT_TOL = 1e-9
_FEAS_TOL = 1e-7
_MAX_PIVOTS = 100_000


class LpInputError(ValueError):
    """Inconsistent or non-finite problem data."""


@dataclass
class LinearProgram:
    """min cᵀx  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  bounds per variable.

    ``bounds`` entries are (lo, hi) with None for unbounded; the default
    is (0, None) for every variable.
    """

    c: np.ndarray
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    bounds: list[tuple[float | None, float | None]] | None = None

    def __post_init__(self):
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = self.c.size
        if self.a_ub is not None:
            self.a_ub = np.asarray(self.a_ub, dtype=float).reshape(-1, n)
            self.b_ub = np.atleast_1d(np.asarray(self.b_ub, dtype=float))
            if self.b_ub.size != self.a_ub.shape[0]:
                raise LpInputError("a_ub/b_ub shape mismatch")
        if self.a_eq is not None:
            self.a_eq = np.asarray(self.a_eq, dtype=float).reshape(-1, n)
            self.b_eq = np.atleast_1d(np.asarray(self.b_eq, dtype=float))
            if self.b_eq.size != self.a_eq.shape[0]:
                raise LpInputError("a_eq/b_eq shape mismatch")
        if self.bounds is None:
            self.bounds = [(0.0, None)] * n
        elif len(self.bounds) != n:
            raise LpInputError("bounds length mismatch")
        for arr in (self.c, self.a_ub, self.b_ub, self.a_eq, self.b_eq):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise LpInputError("non-finite problem data")

    @property
    def n(self) -> int:
        return self.c.size


@dataclass
class SolveReport:
    x: np.ndarray | None
    objective: float
    gap_bound: float
    iterations: int
    status: str  # optimal | infeasible | unbounded | max-iter
    stage_residuals: list[float] = field(default_factory=list)
    stage_ts: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "x": None if self.x is None else [float(v) for v in self.x],
            "objective": self.objective,
            "gap_bound": self.gap_bound,
            "iterations": self.iterations,
            "status": self.status,
            "stage_residuals": self.stage_residuals,
            "stage_ts": self.stage_ts,
        }, sort_keys=True)


def _to_standard_form(lp: LinearProgram):
    """Rewrite onto y >= 0 variables: x = M y + offset.

    Finite-lower variables shift, upper-only variables mirror, free
    variables split into a positive/negative pair; two-sided bounds add
    a y <= hi - lo inequality row.
    """
    n = lp.n
    cols: list[np.ndarray] = []   # each is the x-space direction of one y column
    offset = np.zeros(n)
    extra_rows: list[tuple[int, float]] = []  # (y column, upper bound on it)
    for v, (lo, hi) in enumerate(lp.bounds):
        unit = np.zeros(n)
        unit[v] = 1.0
        if lo is not None:
            offset[v] = lo
            cols.append(unit)
            if hi is not None:
                if hi < lo:
                    raise LpInputError(f"bounds reversed for variable {v}")
                extra_rows.append((len(cols) - 1, hi - lo))
        elif hi is not None:
            offset[v] = hi
            cols.append(-unit)
        else:
            cols.append(unit)
            cols.append(-unit)
    m_map = np.stack(cols, axis=1)  # x = m_map @ y + offset

    a_ub = lp.a_ub if lp.a_ub is not None else np.zeros((0, n))
    b_ub = lp.b_ub if lp.b_ub is not None else np.zeros(0)
    a_eq = lp.a_eq if lp.a_eq is not None else np.zeros((0, n))
    b_eq = lp.b_eq if lp.b_eq is not None else np.zeros(0)

    ub_y = a_ub @ m_map
    ub_b = b_ub - a_ub @ offset
    if extra_rows:
        bump = np.zeros((len(extra_rows), m_map.shape[1]))
        bump_b = np.zeros(len(extra_rows))
        for r, (col, cap) in enumerate(extra_rows):
            bump[r, col] = 1.0
            bump_b[r] = cap
        ub_y = np.vstack([ub_y, bump])
        ub_b = np.concatenate([ub_b, bump_b])
    eq_y = a_eq @ m_map
    eq_b = b_eq - a_eq @ offset
    return m_map, offset, ub_y, ub_b, eq_y, eq_b


def _pivot(tab: np.ndarray, basis: np.ndarray, row: int, col: int):
    tab[row] /= tab[row, col]
    factors = tab[:, col].copy()
    factors[row] = 0.0
    tab -= np.outer(factors, tab[row])
    basis[row] = col


def _simplex_pass(tab: np.ndarray, basis: np.ndarray, allowed: np.ndarray,
                  budget: int) -> tuple[str, int]:
    """Run Bland-rule pivots until optimal/unbounded; last row is the
    objective row, last column the RHS."""
    m = tab.shape[0] - 1
    used = 0
    while used < budget:
        red = tab[-1, :-1]
        eligible = np.nonzero(allowed & (red < -_PIVOT_TOL))[0]
        if eligible.size == 0:
            return "optimal", used
        col = int(eligible[0])  # Bland: smallest eligible index enters
        colvals = tab[:m, col]
        rows = np.nonzero(colvals > _PIVOT_TOL)[0]
        if rows.size == 0:
            return "unbounded", used
        ratios = tab[rows, -1] / colvals[rows]
        best = ratios.min()
        tied = rows[np.nonzero(ratios <= best + 1e-12)[0]]
        # Bland: among ratio ties, the row whose basic variable has the
        # smallest index leaves
        row = int(tied[np.argmin(basis[tied])])
        _pivot(tab, basis, row, col)
        used += 1
    return "max-iter", used


def solve_lp(lp: LinearProgram) -> SolveReport:
    """Two-phase dense primal simplex; Bland's rule prevents cycling."""
    m_map, offset, ub_a, ub_b, eq_a, eq_b = _to_standard_form(lp)
    n_y = m_map.shape[1]
    m_ub, m_eq = ub_a.shape[0], eq_a.shape[0]
    m_rows = m_ub + m_eq

    if m_rows == 0:
        # only bounds: minimize over the box directly
        x = offset + m_map @ np.zeros(n_y)
        cy = m_map.T @ lp.c
        if np.any(cy < -_PIVOT_TOL):
            return SolveReport(None, -np.inf, 0.0, 0, "unbounded")
        return SolveReport(x, float(lp.c @ x), 0.0, 0, "optimal")

    a = np.zeros((m_rows, n_y + m_ub))
    a[:m_ub, :n_y] = ub_a
    a[:m_ub, n_y:n_y + m_ub] = np.eye(m_ub)
    a[m_ub:, :n_y] = eq_a
    b = np.concatenate([ub_b, eq_b])

    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0

    # initial basis: slack where its +1 survived, artificial otherwise
    basis = np.full(m_rows, -1, dtype=np.int64)
    art_rows = []
    for i in range(m_rows):
        if i < m_ub and not neg[i]:
            basis[i] = n_y + i
        else:
            art_rows.append(i)
    n_art = len(art_rows)
    n_total = n_y + m_ub + n_art
    full = np.zeros((m_rows + 1, n_total + 1))
    full[:m_rows, :n_y + m_ub] = a
    full[:m_rows, -1] = b
    for k, i in enumerate(art_rows):
        full[i, n_y + m_ub + k] = 1.0
        basis[i] = n_y + m_ub + k

    pivots = 0
    if n_art:
        cost1 = np.zeros(n_total)
        cost1[n_y + m_ub:] = 1.0
        full[-1, :-1] = cost1
        full[-1, -1] = 0.0
        for i in range(m_rows):
            if cost1[basis[i]]:
                full[-1] -= cost1[basis[i]] * full[i]
        allowed = np.ones(n_total, dtype=bool)
        status, used = _simplex_pass(full, basis, allowed, _MAX_PIVOTS)
        pivots += used
        if status == "max-iter":
            return SolveReport(None, np.nan, 0.0, pivots, "max-iter")
        if -full[-1, -1] > _FEAS_TOL:
            return SolveReport(None, np.nan, 0.0, pivots, "infeasible")
        # pivot zero-level artificials out, drop redundant rows
        drop_rows = []
        for i in range(m_rows):
            if basis[i] >= n_y + m_ub:
                cand = np.nonzero(np.abs(full[i, :n_y + m_ub]) > _PIVOT_TOL)[0]
                if cand.size:
                    _pivot(full, basis, i, int(cand[0]))
                    pivots += 1
                else:
                    drop_rows.append(i)
        if drop_rows:
            keep = [i for i in range(m_rows) if i not in set(drop_rows)]
            full = full[keep + [m_rows]]
            basis = basis[keep]
            m_rows = len(keep)

    # phase 2 over the original objective, artificials barred
    cost2 = np.zeros(n_total)
    cost2[:n_y] = m_map.T @ lp.c
    full[-1, :-1] = cost2
    full[-1, -1] = 0.0
    for i in range(m_rows):
        if cost2[basis[i]]:
            full[-1] -= cost2[basis[i]] * full[i]
    allowed = np.zeros(n_total, dtype=bool)
    allowed[:n_y + m_ub] = True
    status, used = _simplex_pass(full, basis, allowed, _MAX_PIVOTS - pivots)
    pivots += used
    if status != "optimal":
        return SolveReport(None, np.nan if status == "max-iter" else -np.inf,
                           0.0, pivots, status)

    y = np.zeros(n_total)
    y[basis] = full[:m_rows, -1]
    x = m_map @ y[:n_y] + offset
    return SolveReport(x, float(lp.c @ x), 0.0, pivots, "optimal")


@dataclass
class BarrierProblem:
    """min r_wᵀx over x >= 0, 1ᵀx >= q, a x <= cap (per row).

    Constraint count is n + E + 1, which fixes the duality-gap
    certificate (n+E+1)/t of the log-barrier method.
    """

    r_w: np.ndarray
    a: np.ndarray
    q: float
    cap: float | np.ndarray

    def __post_init__(self):
        self.r_w = np.atleast_1d(np.asarray(self.r_w, dtype=float))
        self.a = np.asarray(self.a, dtype=float).reshape(-1, self.r_w.size)
        self.cap = np.broadcast_to(
            np.asarray(self.cap, dtype=float), (self.a.shape[0],)).copy()

    @property
    def n(self) -> int:
        return self.r_w.size

    @property
    def n_edges(self) -> int:
        return self.a.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.n + self.n_edges + 1

    def slacks(self, x: np.ndarray) -> tuple[np.ndarray, float, np.ndarray]:
        """(x, demand surplus, capacity slack); all must stay > 0 inside."""
        return x, float(x.sum() - self.q), self.cap - self.a @ x

    def strictly_feasible(self, x: np.ndarray, margin: float = 0.0) -> bool:
        xs, s, u = self.slacks(x)
        return bool(xs.min() > margin and s > margin and u.min() > margin)


def barrier_value(bp: BarrierProblem, x: np.ndarray, t: float) -> float:
    xs, s, u = bp.slacks(x)
    return float(t * bp.r_w @ x - np.sum(np.log(xs)) - np.log(s)
                 - np.sum(np.log(u)))


def barrier_gradient(bp: BarrierProblem, x: np.ndarray, t: float) -> np.ndarray:
    """Gradient of the barrier objective at sharpness t.

    The demand term is the derivative of -log(1ᵀx - q), i.e.
    -(1/(1ᵀx - q))·1; the capacity term is aᵀ(1/(cap - a x)).  This is
    the central-path stationarity residual: it vanishes on the path.
    """
    xs, s, u = bp.slacks(x)
    return t * bp.r_w - 1.0 / xs - (1.0 / s) + bp.a.T @ (1.0 / u)


def _barrier_hessian(bp: BarrierProblem, x: np.ndarray) -> np.ndarray:
    xs, s, u = bp.slacks(x)
    h = np.diag(1.0 / xs ** 2)
    h += np.ones((bp.n, bp.n)) / s ** 2
    h += bp.a.T @ (bp.a / (u ** 2)[:, None])
    return h


def _phase_one_start(bp: BarrierProblem) -> np.ndarray | None:
    """Maximize the smallest constraint margin with an auxiliary LP; the
    optimizer is a strictly feasible start whenever the margin is > 0."""
    n, e = bp.n, bp.n_edges
    c = np.zeros(n + 1)
    c[-1] = -1.0  # maximize delta
    rows = np.zeros((n + 1 + e, n + 1))
    rhs = np.zeros(n + 1 + e)
    rows[:n, :n] = -np.eye(n)      # delta - x_i <= 0
    rows[:n, -1] = 1.0
    rows[n, :n] = -1.0             # delta - 1ᵀx <= -q
    rows[n, -1] = 1.0
    rhs[n] = -bp.q
    rows[n + 1:, :n] = bp.a        # a x + delta <= cap
    rows[n + 1:, -1] = 1.0
    rhs[n + 1:] = bp.cap
    bounds = [(0.0, None)] * n + [(None, 1.0)]
    rep = solve_lp(LinearProgram(c=c, a_ub=rows, b_ub=rhs, bounds=bounds))
    if rep.status != "optimal" or rep.x is None or rep.x[-1] <= 1e-9:
        return None
    return rep.x[:-1]


def barrier_solve(bp: BarrierProblem, t0: float = 1.0, mu_growth: float = 10.0,
                  eps_gap: float = 1e-6, x0: np.ndarray | None = None,
                  callback=None, max_inner: int = 200,
                  residual_tol: float = 1e-6) -> SolveReport:
    """Log-barrier path following with damped Newton inner iterations.

    Outer stages multiply t by ``mu_growth`` until the certified gap
    (n+E+1)/t drops to ``eps_gap``.  Each inner loop runs Newton with
    Armijo backtracking (shrink 0.5, slope fraction 0.01) until the
    squared Newton decrement halves below 1e-10 and the stationarity
    residual is within ``residual_tol``.  Iterates stay strictly
    feasible throughout; ``callback(x, t)`` observes each accepted step.
    """
    if mu_growth <= 1.0:
        raise ValueError("mu_growth must exceed 1")
    if x0 is None:
        x = _phase_one_start(bp)
        if x is None:
            return SolveReport(None, np.nan, np.inf, 0, "infeasible")
    else:
        x = np.asarray(x0, dtype=float).copy()
        if not bp.strictly_feasible(x):
            raise ValueError("x0 is not strictly feasible")

    m_constr = bp.n_constraints
    t = float(t0)
    total_newton = 0
    stage_residuals: list[float] = []
    stage_ts: list[float] = []
    status = "optimal"
    reg = 1e-12

    while True:
        for _ in range(max_inner):
            grad = barrier_gradient(bp, x, t)
            hess = _barrier_hessian(bp, x)
            hess[np.diag_indices_from(hess)] += reg
            # Jacobi equilibration: the barrier Hessian mixes slack scales
            # across many orders of magnitude, which otherwise starves the
            # factorization of digits near the central path
            scale = 1.0 / np.sqrt(np.diag(hess))
            hs = hess * np.outer(scale, scale)
            try:
                chol = scipy.linalg.cho_factor(hs, lower=True)
                step = -scale * scipy.linalg.cho_solve(chol, grad * scale)
            except scipy.linalg.LinAlgError:
                step = -np.linalg.solve(hess, grad)
            decrement_sq = float(-grad @ step)
            if decrement_sq / 2.0 <= 1e-10 and np.abs(grad).max() <= residual_tol:
                break
            alpha = 1.0
            phi0 = barrier_value(bp, x, t)
            slope = float(grad @ step)  # negative
            while True:
                trial = x + alpha * step
                if (bp.strictly_feasible(trial)
                        and barrier_value(bp, trial, t) <= phi0 + 0.01 * alpha * slope):
                    break
                alpha *= 0.5
                if alpha < 1e-14:
                    break
            if alpha < 1e-14:
                # at numerical precision; treat tiny remaining decrement as done
                if decrement_sq / 2.0 > 1e-8:
                    status = "max-iter"
                break
            x = x + alpha * step
            total_newton += 1
            if callback is not None:
                callback(x.copy(), t)
            if np.abs(alpha * step).max() <= 1e-15 * (1.0 + np.abs(x).max()):
                break  # float64-limited: the iterate cannot move further
        else:
            status = "max-iter"
        stage_residuals.append(float(np.abs(barrier_gradient(bp, x, t)).max()))
        stage_ts.append(t)
        if status != "optimal":
            break
        if m_constr / t <= eps_gap:
            break
        t *= mu_growth

    return SolveReport(x=x, objective=float(bp.r_w @ x),
                       gap_bound=m_constr / t, iterations=total_newton,
                       status=status, stage_residuals=stage_residuals,
                       stage_ts=stage_ts)
