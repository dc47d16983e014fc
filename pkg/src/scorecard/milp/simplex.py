"""Dense bounded-variable two-phase simplex.

Sized for the LPs this package produces (a few thousand variables at most):
dense constraint matrix, explicit basis inverse with product-form updates
and periodic refactorization, Dantzig pricing with a Bland fallback once
degeneracy stalls progress.

Start handling: rows are crashed onto a slack basis at an optional caller
hint ``x0``; artificial columns are created only for rows the hint leaves
violated, so a good hint (for example the parent node's optimum during
branch-and-bound) makes phase 1 nearly free.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

D_TOL = 1e-9        # reduced-cost / entering tolerance
R_TOL = 1e-9        # ratio-test pivot tolerance
FEAS_TOL = 1e-7     # phase-1 infeasibility threshold
DEGEN_LIMIT = 80    # degenerate pivots before switching to Bland
REFACTOR_EVERY = 500


class SimplexError(RuntimeError):
    pass


class _NumericalTrouble(SimplexError):
    """Internal: basis went numerically bad; the solve is restarted once."""


@dataclass
class LPProblem:
    """min c @ x  s.t.  a x (sense) b,  lb <= x <= ub."""

    c: np.ndarray
    a: np.ndarray
    sense: np.ndarray  # array of 'L' | 'G' | 'E'
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64)
        self.a = np.atleast_2d(np.asarray(self.a, dtype=np.float64))
        self.b = np.asarray(self.b, dtype=np.float64)
        self.sense = np.asarray(self.sense)
        self.lb = np.asarray(self.lb, dtype=np.float64)
        self.ub = np.asarray(self.ub, dtype=np.float64)


@dataclass
class LPSolution:
    status: str                      # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float = np.nan
    basis: tuple[int, ...] | None = None
    iterations: int = 0
    vstatus: np.ndarray | None = None   # statuses over structural+slack columns
    meta: dict = field(default_factory=dict)


AT_LOWER, AT_UPPER, BASIC, FREE = 0, 1, 2, 3


class _Tableau:
    def __init__(self, a: np.ndarray, b: np.ndarray, lb: np.ndarray,
                 ub: np.ndarray):
        self.a = a
        self.b = b
        self.lb = lb
        self.ub = ub
        self.m, self.n = a.shape
        self.status = np.empty(self.n, dtype=np.int64)
        self.values = np.zeros(self.n)
        self.basis: list[int] = []
        self.binv: np.ndarray | None = None
        self.pivots = 0
        self.degenerate_streak = 0
        self.use_bland = False

    def refactor(self):
        bmat = self.a[:, self.basis]
        try:
            self.binv = np.linalg.inv(bmat)
        except np.linalg.LinAlgError as exc:
            raise _NumericalTrouble("singular basis") from exc
        if not np.all(np.isfinite(self.binv)):
            raise _NumericalTrouble("non-finite basis inverse")

    def sync_basic(self) -> np.ndarray:
        nb = self.status != BASIC
        rhs = self.b - self.a[:, nb] @ self.values[nb]
        xb = self.binv @ rhs
        self.values[self.basis] = xb
        return xb

    def _reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        y = cost[self.basis] @ self.binv
        d = cost - y @ self.a
        d[self.basis] = 0.0
        return d

    def iterate(self, cost: np.ndarray, max_iter: int) -> str:
        """Price with maintained reduced costs and basic values; both are
        refreshed on refactorization to keep drift in check."""
        xb = self.sync_basic()
        d = self._reduced_costs(cost)
        since_refresh = 0
        for _ in range(max_iter):
            movable = self.ub > self.lb
            at_lo = (self.status == AT_LOWER) & (d < -D_TOL) & movable
            at_up = (self.status == AT_UPPER) & (d > D_TOL) & movable
            free = (self.status == FREE) & (np.abs(d) > D_TOL)
            eligible = np.flatnonzero(at_lo | at_up | free)
            if eligible.size == 0:
                if since_refresh:
                    self.refactor()
                    xb = self.sync_basic()
                    d = self._reduced_costs(cost)
                    since_refresh = 0
                    eligible = np.flatnonzero(
                        ((self.status == AT_LOWER) & (d < -D_TOL) & movable)
                        | ((self.status == AT_UPPER) & (d > D_TOL) & movable)
                        | ((self.status == FREE) & (np.abs(d) > D_TOL))
                    )
                    if eligible.size:
                        continue
                return "optimal"

            if self.use_bland:
                e = int(eligible[0])
            else:
                e = int(eligible[np.argmax(np.abs(d[eligible]))])
            if self.status[e] == AT_UPPER:
                direction = -1.0
            elif self.status[e] == AT_LOWER:
                direction = 1.0
            else:
                direction = 1.0 if d[e] < 0 else -1.0

            w = self.binv @ self.a[:, e]
            step = w * direction
            # distance to the entering variable's own blocking bound
            # (superbasic starts sit strictly inside their bounds)
            if direction > 0:
                span = self.ub[e] - self.values[e]
            else:
                span = self.values[e] - self.lb[e]
            t_best = span if np.isfinite(span) else np.inf
            leave_pos = -1
            leave_to = -1
            basis_arr = np.asarray(self.basis)
            lb_b = self.lb[basis_arr]
            ub_b = self.ub[basis_arr]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_lo = np.where(step > R_TOL, (xb - lb_b) / step, np.inf)
                t_hi = np.where(step < -R_TOL, (ub_b - xb) / (-step), np.inf)
            t_lo = np.where(np.isfinite(lb_b), t_lo, np.inf)
            t_hi = np.where(np.isfinite(ub_b), t_hi, np.inf)
            t_row = np.maximum(np.minimum(t_lo, t_hi), 0.0)
            if t_row.size:
                t_min = float(t_row.min())
                if t_min < t_best:
                    ties = np.flatnonzero(t_row <= t_min + R_TOL)
                    if self.use_bland:
                        r = int(ties[np.argmin(basis_arr[ties])])
                    else:
                        r = int(ties[np.argmax(np.abs(step[ties]))])
                    t_best = t_min
                    leave_pos = r
                    leave_to = AT_LOWER if t_lo[r] <= t_hi[r] else AT_UPPER

            if not np.isfinite(t_best):
                return "unbounded"

            self.degenerate_streak = (
                self.degenerate_streak + 1 if t_best <= R_TOL else 0
            )
            if self.degenerate_streak > DEGEN_LIMIT and not self.use_bland:
                self.use_bland = True
                self.refactor()
                xb = self.sync_basic()
                d = self._reduced_costs(cost)
                since_refresh = 0

            if leave_pos < 0:
                # bound flip: no basis change, reduced costs unchanged
                self.values[e] = self.ub[e] if direction > 0 else self.lb[e]
                self.status[e] = AT_UPPER if direction > 0 else AT_LOWER
                xb = xb - step * t_best
                self.values[self.basis] = xb
                continue

            leaving = self.basis[leave_pos]
            piv = w[leave_pos]
            if abs(piv) < 1e-9:
                # too small to pivot on safely; refresh and re-price
                self.refactor()
                xb = self.sync_basic()
                d = self._reduced_costs(cost)
                since_refresh = 0
                self.degenerate_streak += DEGEN_LIMIT // 4
                continue
            enter_val = self.values[e] + direction * t_best
            self.values[leaving] = (
                self.lb[leaving] if leave_to == AT_LOWER else self.ub[leaving]
            )
            self.status[leaving] = leave_to
            self.status[e] = BASIC
            self.basis[leave_pos] = e
            row = self.binv[leave_pos, :] / piv
            self.binv -= np.outer(w, row)
            self.binv[leave_pos, :] = row
            xb = xb - step * t_best
            xb[leave_pos] = enter_val
            self.values[self.basis] = xb
            # incremental reduced-cost update for the new basis
            d_e = d[e]
            d = d - d_e * (self.binv[leave_pos, :] @ self.a)
            d[self.basis] = 0.0
            self.pivots += 1
            since_refresh += 1
            if self.pivots % REFACTOR_EVERY == 0 or since_refresh >= 150:
                self.refactor()
                xb = self.sync_basic()
                d = self._reduced_costs(cost)
                since_refresh = 0
        raise SimplexError("simplex iteration limit exceeded")

    def drive_out(self, protected: set[int]):
        """Pivot zero-valued protected (artificial) columns out of the basis
        where a structural pivot exists; redundant rows keep them pinned."""
        for pos in range(self.m):
            col = self.basis[pos]
            if col not in protected:
                continue
            row = self.binv[pos, :] @ self.a
            row[list(protected)] = 0.0
            for j in self.basis:
                row[j] = 0.0
            cand = np.flatnonzero(np.abs(row) > 1e-8)
            if cand.size == 0:
                continue
            e = int(cand[np.argmax(np.abs(row[cand]))])
            piv = row[e]
            w = self.binv @ self.a[:, e]
            self.status[col] = AT_LOWER
            self.values[col] = 0.0
            self.status[e] = BASIC
            self.basis[pos] = e
            brow = self.binv[pos, :] / piv
            self.binv -= np.outer(w, brow)
            self.binv[pos, :] = brow
        self.sync_basic()


def simplex_solve(lp: LPProblem, x0: np.ndarray | None = None,
                  max_iter: int | None = None) -> LPSolution:
    """Solve a bounded LP; statuses are reported, never raised.

    ``x0`` is an optional starting hint: it is clamped into the bounds,
    non-bound interior values snap to the nearest bound, and only rows left
    violated receive artificial variables. A numerically failed run is
    retried once from the default start under Bland's rule.
    """
    try:
        return _simplex_once(lp, x0, max_iter, force_bland=False)
    except SimplexError:
        return _simplex_once(lp, None, max_iter, force_bland=True)


def _simplex_once(lp: LPProblem, x0: np.ndarray | None,
                  max_iter: int | None, force_bland: bool) -> LPSolution:
    m, n = lp.a.shape
    if lp.c.shape != (n,) or lp.b.shape != (m,) or len(lp.sense) != m:
        raise SimplexError("inconsistent LP dimensions")
    if np.any(lp.lb > lp.ub + 1e-12):
        return LPSolution(status="infeasible")

    slack_lb = np.zeros(m)
    slack_ub = np.zeros(m)
    for i, s in enumerate(lp.sense):
        if s == "L":
            slack_ub[i] = np.inf
        elif s == "G":
            slack_lb[i] = -np.inf
        elif s != "E":
            raise SimplexError(f"bad sense {s!r}")

    # crash point: keep the hint, snapping only values already at a bound;
    # interior values stay put as superbasic (FREE-status) columns
    if x0 is None:
        x0 = np.zeros(n)
    start = np.clip(np.nan_to_num(x0, copy=True), lp.lb, lp.ub)
    snap = start.copy()
    status0 = np.full(n, FREE, dtype=np.int64)
    near_lo = np.isfinite(lp.lb) & (np.abs(start - lp.lb) <= 1e-9)
    near_hi = np.isfinite(lp.ub) & (np.abs(lp.ub - start) <= 1e-9)
    snap[near_hi] = lp.ub[near_hi]
    status0[near_hi] = AT_UPPER
    snap[near_lo] = lp.lb[near_lo]
    status0[near_lo] = AT_LOWER

    resid = lp.b - lp.a @ snap  # required slack value per row
    slack_val = np.clip(resid, slack_lb, slack_ub)
    violation = resid - slack_val
    violated = np.flatnonzero(np.abs(violation) > 1e-11)
    n_art = len(violated)

    cols = [lp.a, np.eye(m)]
    if n_art:
        art = np.zeros((m, n_art))
        for k, i in enumerate(violated):
            art[i, k] = 1.0 if violation[i] > 0 else -1.0
        cols.append(art)
    a_full = np.hstack(cols)
    lb = np.concatenate([lp.lb, slack_lb, np.zeros(n_art)])
    ub = np.concatenate([lp.ub, slack_ub, np.full(n_art, np.inf)])

    tab = _Tableau(a_full, lp.b, lb, ub)
    tab.use_bland = force_bland
    tab.status[:n] = status0
    tab.values[:n] = snap
    tab.status[n:] = AT_LOWER
    tab.values[n:] = 0.0
    basis = []
    art_cols = {}
    for k, i in enumerate(violated):
        art_cols[i] = n + m + k
    for i in range(m):
        if i in art_cols:
            basis.append(art_cols[i])
            tab.status[n + i] = (AT_LOWER if slack_val[i] == slack_lb[i]
                                 else AT_UPPER)
            tab.values[n + i] = slack_val[i]
        else:
            basis.append(n + i)
    for col in basis:
        tab.status[col] = BASIC
    tab.basis = basis
    tab.refactor()

    budget = max_iter or (60 * (m + n) + 20000)
    protected = set(range(n + m, n + m + n_art))

    if n_art:
        cost1 = np.zeros(n + m + n_art)
        cost1[n + m:] = 1.0
        status = tab.iterate(cost1, budget)
        if status != "optimal":
            raise SimplexError(f"phase 1 ended with status {status}")
        tab.sync_basic()
        level = float(cost1 @ tab.values)
        if level > FEAS_TOL:
            return LPSolution(status="infeasible", iterations=tab.pivots,
                              meta={"phase1": level})
        tab.drive_out(protected)
        tab.lb[n + m:] = 0.0
        tab.ub[n + m:] = 0.0
        for j in protected:
            if tab.status[j] != BASIC:
                tab.status[j] = AT_LOWER
                tab.values[j] = 0.0
        tab.use_bland = False
        tab.degenerate_streak = 0

    cost2 = np.concatenate([lp.c, np.zeros(m + n_art)])
    status = tab.iterate(cost2, budget)
    if status == "unbounded":
        return LPSolution(status="unbounded", iterations=tab.pivots)
    tab.sync_basic()
    x = tab.values[:n].copy()
    np.clip(x, lp.lb, lp.ub, out=x)
    vstatus = None
    if all(col < n + m for col in tab.basis):
        vstatus = tab.status[: n + m].astype(np.int8)
    return LPSolution(
        status="optimal",
        x=x,
        objective=float(lp.c @ x),
        basis=tuple(tab.basis),
        iterations=tab.pivots,
        vstatus=vstatus,
    )


# ---------------------------------------------------------------------------
# dual simplex re-solve from an inherited basis


def dual_solve_from_basis(lp: LPProblem, basis, vstatus,
                          max_iter: int | None = None,
                          hint_out: list | None = None) -> LPSolution | None:
    """Re-optimize after bound/coefficient changes, starting from a basis.

    Dual feasibility is restored by flipping wrong-signed nonbasics between
    their (finite) bounds; primal feasibility is then restored by bounded
    dual pivots. Returns None when this start cannot be used (artificials
    in the inherited basis, an unflippable column, or an iteration stall) -
    the caller should fall back to the primal path. On a stall the partial
    point is appended to ``hint_out`` so the primal can crash from it.
    """
    m, n = lp.a.shape
    if any(col >= n + m for col in basis):
        return None
    slack_lb = np.zeros(m)
    slack_ub = np.zeros(m)
    # bounded structural variables imply finite slack ranges, which makes
    # every dual-infeasible nonbasic flippable
    if np.all(np.isfinite(lp.lb)) and np.all(np.isfinite(lp.ub)):
        row_hi = np.maximum(lp.a, 0.0) @ lp.ub + np.minimum(lp.a, 0.0) @ lp.lb
        row_lo = np.maximum(lp.a, 0.0) @ lp.lb + np.minimum(lp.a, 0.0) @ lp.ub
    else:
        row_hi = np.full(m, np.inf)
        row_lo = np.full(m, -np.inf)
    for i, s in enumerate(lp.sense):
        if s == "L":
            slack_ub[i] = max(0.0, lp.b[i] - row_lo[i])
        elif s == "G":
            slack_lb[i] = min(0.0, lp.b[i] - row_hi[i])
        elif s != "E":
            raise SimplexError(f"bad sense {s!r}")
    a = np.hstack([lp.a, np.eye(m)])
    lb = np.concatenate([lp.lb, slack_lb])
    ub = np.concatenate([lp.ub, slack_ub])
    if np.any(lb > ub + 1e-12):
        return LPSolution(status="infeasible")
    cost = np.concatenate([lp.c, np.zeros(m)])

    status = np.asarray(vstatus, dtype=np.int64).copy()
    basis = list(basis)
    in_basis = np.zeros(n + m, dtype=bool)
    in_basis[basis] = True
    status[in_basis] = BASIC
    values = np.zeros(n + m)
    nb_low = ~in_basis & (status == AT_LOWER)
    nb_up = ~in_basis & (status == AT_UPPER)
    values[nb_low] = lb[nb_low]
    values[nb_up] = ub[nb_up]
    bad = (~in_basis) & (status == AT_LOWER) & ~np.isfinite(lb)
    bad |= (~in_basis) & (status == AT_UPPER) & ~np.isfinite(ub)
    if np.any(bad):
        return None

    try:
        binv = np.linalg.inv(a[:, basis])
    except np.linalg.LinAlgError:
        return None

    def reduced_costs():
        y = cost[basis] @ binv
        d = cost - y @ a
        d[basis] = 0.0
        return d

    # dual phase 1: flip wrong-signed nonbasics to their opposite bound,
    # and park wrong-signed superbasics at the bound their cost prefers
    d = reduced_costs()
    flip_lo = (~in_basis) & (status == AT_LOWER) & (d < -D_TOL)
    flip_up = (~in_basis) & (status == AT_UPPER) & (d > D_TOL)
    if np.any(flip_lo & ~np.isfinite(ub)) or np.any(flip_up & ~np.isfinite(lb)):
        return None
    status[flip_lo] = AT_UPPER
    values[flip_lo] = ub[flip_lo]
    status[flip_up] = AT_LOWER
    values[flip_up] = lb[flip_up]
    free_nb = (~in_basis) & (status == FREE) & (np.abs(d) > D_TOL)
    snap_lo = free_nb & (d > D_TOL) & np.isfinite(lb)
    snap_hi = free_nb & (d < -D_TOL) & np.isfinite(ub)
    status[snap_lo] = AT_LOWER
    values[snap_lo] = lb[snap_lo]
    status[snap_hi] = AT_UPPER
    values[snap_hi] = ub[snap_hi]
    if np.any(free_nb & ~snap_lo & ~snap_hi):
        return None

    budget = max_iter or (40 * m + 2000)
    pivots = 0
    best_total = np.inf
    stall = 0
    since_refresh = 0

    def full_xb():
        nb_mask = status != BASIC
        out = binv @ (lp.b - a[:, nb_mask] @ values[nb_mask])
        values[basis] = out
        return out

    xb = full_xb()
    d = reduced_costs()
    for _ in range(budget):
        below = lb[basis] - xb
        above = xb - ub[basis]
        viol = np.maximum(below, above)
        total = float(np.sum(np.maximum(viol, 0.0)))
        if total < best_total - 1e-9:
            best_total = total
            stall = 0
        else:
            stall += 1
            if stall > 200:
                if hint_out is not None:
                    hint_out.append(np.clip(values[:n], lp.lb, lp.ub))
                return None
        r = int(np.argmax(viol))
        if viol[r] <= FEAS_TOL:
            try:
                binv = np.linalg.inv(a[:, basis])
            except np.linalg.LinAlgError:
                return None
            xb = full_xb()
            if float(np.max(np.maximum(lb[basis] - xb, xb - ub[basis]))) > FEAS_TOL:
                continue
            d = reduced_costs()
            dual_ok = not (
                np.any((status == AT_LOWER) & ~in_basis & (d < -1e-7))
                or np.any((status == AT_UPPER) & ~in_basis & (d > 1e-7))
                or np.any((status == FREE) & ~in_basis & (np.abs(d) > 1e-7))
            )
            if not dual_ok:
                return None
            x = np.clip(values[:n], lp.lb, lp.ub)
            return LPSolution(
                status="optimal", x=x, objective=float(lp.c @ x),
                basis=tuple(basis), iterations=pivots,
                vstatus=status[: n + m].astype(np.int8),
            )
        increase = below[r] > above[r]
        target = lb[basis[r]] if increase else ub[basis[r]]
        row = binv[r, :] @ a

        nb = (status != BASIC) & (ub > lb)  # fixed columns cannot move
        sigma = np.where(status == AT_UPPER, -1.0, 1.0)
        gain = -row * sigma
        want = gain > 1e-11 if increase else gain < -1e-11
        # FREE columns may move either way; allow the reversed direction too
        is_free = status == FREE
        rev_ok = (row > 1e-11) if increase else (row < -1e-11)
        use_rev = is_free & ~want & rev_ok
        sigma = np.where(use_rev, -1.0, sigma)
        eligible = nb & (np.abs(row) > 1e-9) & (want | use_rev)
        idx = np.flatnonzero(eligible)
        if idx.size == 0:
            return LPSolution(status="infeasible", iterations=pivots)
        ratios = np.abs(d[idx]) / np.abs(row[idx])
        rmin = float(ratios.min())
        ties = idx[ratios <= rmin + 1e-12]
        e = int(ties[np.argmax(np.abs(row[ties]))])
        best_alpha = row[e]
        best_sigma = sigma[e]
        need = abs(target - xb[r])
        t = need / abs(best_alpha)
        span = (ub[e] - values[e]) if best_sigma > 0 else (values[e] - lb[e])
        if np.isfinite(span) and span < t - 1e-12:
            # entering hits its own bound first: bound flip, r stays violated
            w = binv @ a[:, e]
            delta = span * best_sigma
            values[e] = ub[e] if best_sigma > 0 else lb[e]
            status[e] = AT_UPPER if best_sigma > 0 else AT_LOWER
            xb = xb - w * delta
            values[basis] = xb
            pivots += 1
            continue
        leaving = basis[r]
        w = binv @ a[:, e]
        piv = w[r]
        if abs(piv) < 1e-11:
            return None
        enter_val = values[e] + best_sigma * t
        values[leaving] = target
        status[leaving] = AT_LOWER if increase else AT_UPPER
        status[e] = BASIC
        basis[r] = e
        in_basis[leaving] = False
        in_basis[e] = True
        brow = binv[r, :] / piv
        binv -= np.outer(w, brow)
        binv[r, :] = brow
        xb = xb - w * (best_sigma * t)
        xb[r] = enter_val
        values[basis] = xb
        d = d - d[e] * (row / best_alpha)
        d[basis] = 0.0
        pivots += 1
        since_refresh += 1
        if pivots % REFACTOR_EVERY == 0 or since_refresh >= 150:
            try:
                binv = np.linalg.inv(a[:, basis])
            except np.linalg.LinAlgError:
                return None
            xb = full_xb()
            d = reduced_costs()
            since_refresh = 0
    return None


# ---------------------------------------------------------------------------
# instance relaxation


def relaxation(instance, extra_rows: tuple = ()) -> LPProblem:
    """LP relaxation of an IPInstance: integrality dropped, rows verbatim.

    ``extra_rows`` appends additional LinearConstraint rows (used by data
    reduction for the prediction-flip constraint).
    """
    n = instance.n_vars
    rows = list(instance.constraints) + list(extra_rows)
    a = np.zeros((len(rows), n))
    b = np.zeros(len(rows))
    sense = np.empty(len(rows), dtype="<U1")
    code = {"<=": "L", ">=": "G", "==": "E"}
    for r, row in enumerate(rows):
        for i, cf in zip(row.indices, row.coefs):
            a[r, i] += cf
        b[r] = row.rhs
        sense[r] = code[row.sense]
    lo, hi = instance.var_bounds()
    return LPProblem(c=instance.objective_vector(), a=a, sense=sense, b=b,
                     lb=lo, ub=hi)
