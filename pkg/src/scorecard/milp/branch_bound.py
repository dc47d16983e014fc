"""Branch-and-bound over the coefficient lattice with LP-relaxation bounds.

Search design: best-first on the LP bound with a depth-first plunge every
50 nodes; branching on the most fractional coefficient (loss indicators
only when every coefficient is integral); derived variables (l0/l1
indicators, selectors, feature-use, sign) are never branched on - they are
fixed by domain propagation once the coefficients they depend on commit.

Two node-level tightenings keep the relaxation useful:
  - per-node Big-M values recomputed from the current coefficient boxes;
  - when every margin coefficient is integral, the margin constant is
    lifted to 1 inside the engine (margins are then integers, so
    "margin >= gamma" and "margin >= 1" admit the same integer points),
    which stops the relaxation from paying for misclassifications at a
    tiny fraction of their true cost.
Both tightenings only cut fractional points, never integer solutions, so
every node bound stays a valid lower bound for its subtree.
"""

from __future__ import annotations

import bisect
import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from ..formulate import (
    IPInstance,
    assignment_objective,
    check_feasible,
    decode_assignment,
    decode_model,
)
from ..scoring import ScoringSystem
from .simplex import LPProblem, SimplexError, dual_solve_from_basis, simplex_solve

INT_TOL = 1e-6
PRUNE_EPS = 1e-9
PLUNGE_EVERY = 50
POLISH_PASSES = 25

_CORE_PREFIXES = (
    "loss[", "l0lo[", "l0hi[", "l1lo[", "l1hi[", "pen[", "pick1[", "value[",
    "use[", "count[", "rmax[", "sgnhi[", "sgnlo[",
)


@dataclass
class SolveResult:
    status: str                 # optimal | feasible-budget-exhausted |
                                # infeasible | no-incumbent
    incumbent: np.ndarray | None
    incumbent_objective: float
    lower_bound: float
    gap: float
    nodes_explored: int
    wall_time: float
    lambda_values: tuple[int, ...] | None = None
    model: ScoringSystem | None = None
    trace: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class _Dom:
    """Index window [lo, hi] into a sorted tuple of allowed values."""

    values: tuple[int, ...]
    lo: int
    hi: int

    @property
    def min(self) -> int:
        return self.values[self.lo]

    @property
    def max(self) -> int:
        return self.values[self.hi]

    @property
    def singleton(self) -> bool:
        return self.lo == self.hi

    def contains(self, v: int) -> bool:
        if v < self.min or v > self.max:
            return False
        k = bisect.bisect_left(self.values, v, self.lo, self.hi + 1)
        return k <= self.hi and self.values[k] == v

    def nearest(self, x: float) -> int:
        """Allowed value nearest to x; halfway ties resolve toward zero."""
        k = bisect.bisect_left(self.values, x, self.lo, self.hi + 1)
        cand = []
        if k <= self.hi:
            cand.append(self.values[k])
        if k - 1 >= self.lo:
            cand.append(self.values[k - 1])
        return min(cand, key=lambda v: (abs(v - x), abs(v)))

    def split_le(self, v: int) -> tuple["_Dom | None", "_Dom | None"]:
        """(values <= v, values >= v + 1); either side None when empty."""
        k = bisect.bisect_right(self.values, v, self.lo, self.hi + 1)
        left = _Dom(self.values, self.lo, k - 1) if k - 1 >= self.lo else None
        right = _Dom(self.values, k, self.hi) if k <= self.hi else None
        return left, right


def _full_dom(values: tuple[int, ...]) -> _Dom:
    return _Dom(values, 0, len(values) - 1)


class _Engine:
    def __init__(self, instance: IPInstance, keep_trace: bool):
        self.instance = instance
        self.keep_trace = keep_trace
        self.trace: list[str] = []

        rows = instance.constraints
        self.n_vars = instance.n_vars
        self.obj = instance.objective_vector()
        self.lb0, self.ub0 = instance.var_bounds()
        code = {"<=": "L", ">=": "G", "==": "E"}
        self.a = np.zeros((len(rows), self.n_vars))
        self.b = np.zeros(len(rows))
        self.sense = np.empty(len(rows), dtype="<U1")
        row_of = {}
        for r, row in enumerate(rows):
            for i, cf in zip(row.indices, row.coefs):
                self.a[r, i] += cf
            self.b[r] = row.rhs
            self.sense[r] = code[row.sense]
            row_of[row.name] = r
        self.extra_rows = [
            row for row in rows if not row.name.startswith(_CORE_PREFIXES)
        ]

        loss = instance.loss
        self.psi = np.asarray(loss.psi, dtype=np.int64)
        self.lam_vars = np.asarray(instance.lambda_vars, dtype=np.int64)
        self.coef = loss.coef
        self.cpos = np.maximum(self.coef, 0.0)
        self.cneg = np.minimum(self.coef, 0.0)
        self.loss_rows = np.array(
            [row_of[f"loss[{i}]"] for i in range(instance.n_train)], dtype=np.int64
        )
        self.gamma_eff = 1.0 if instance.margin_is_integral() else instance.gamma
        self.b[self.loss_rows] = self.gamma_eff
        self.wvec = self.obj[self.psi]
        # Big-M recomputed once for the lifted margin; the matrix is then
        # shared by every node (children differ from parents only in bounds,
        # which keeps the parent basis dual-feasible for child re-solves)
        dmin0 = np.array([v.lower for v in instance.variables],
                         dtype=np.float64)[self.lam_vars]
        dmax0 = np.array([v.upper for v in instance.variables],
                         dtype=np.float64)[self.lam_vars]
        m_min0 = self.cpos @ dmin0 + self.cneg @ dmax0
        self.m_root = np.maximum(self.gamma_eff - m_min0, 1e-6)
        self.a[self.loss_rows, self.psi] = self.m_root

        self.domains0 = tuple(_full_dom(d) for d in instance.lambda_domains())
        self.n_lam = len(self.domains0)
        self._psi_pos = {int(v): i for i, v in enumerate(self.psi)}
        self._lam_pos = {int(v): k for k, v in enumerate(self.lam_vars)}
        self._alpha_lam = {link.alpha: link.lam for link in instance.zero_links}
        # vectorized link layout for hint repair (core-formulation instances)
        self._alpha_idx = np.array([l.alpha for l in instance.zero_links],
                                   dtype=np.int64)
        self._alpha_of_lam = np.array(
            [self._lam_pos[l.lam] for l in instance.zero_links], dtype=np.int64)
        self._beta_idx = np.array([l.beta for l in instance.abs_links],
                                  dtype=np.int64)
        self._beta_of_lam = np.array(
            [self._lam_pos[l.lam] for l in instance.abs_links], dtype=np.int64)
        caps = []
        for link in instance.zero_links:
            dom = self.domains0[self._lam_pos[link.lam]]
            caps.append(max(abs(dom.min), abs(dom.max), 1))
        self._alpha_cap = np.array(caps, dtype=np.float64)

    # -- propagation --------------------------------------------------------

    def propagate(self, domains, psi_fix):
        """Bounds and Big-M values implied by the coefficient boxes.

        Fixes the linked derived variables whose value is already decided
        for every integer point of the box; returns None when a conflict
        proves the box holds no feasible integer assignment.
        """
        ins = self.instance
        lb = self.lb0.copy()
        ub = self.ub0.copy()
        dmin = np.array([d.min for d in domains], dtype=np.float64)
        dmax = np.array([d.max for d in domains], dtype=np.float64)
        lb[self.lam_vars] = dmin
        ub[self.lam_vars] = dmax

        pos_of = self._lam_pos
        alpha_fixed: dict[int, float] = {}
        for link in ins.zero_links:
            d = domains[pos_of[link.lam]]
            if not d.contains(0):
                lb[link.alpha] = 1.0
                alpha_fixed[link.alpha] = 1.0
            elif d.singleton:
                ub[link.alpha] = 0.0
                alpha_fixed[link.alpha] = 0.0
        for link in ins.abs_links:
            d = domains[pos_of[link.lam]]
            ub[link.beta] = max(abs(d.min), abs(d.max))
        for link in ins.selector_links:
            d = domains[pos_of[link.lam]]
            if not d.contains(link.value):
                ub[link.u] = 0.0
            elif d.singleton:
                lb[link.u] = 1.0
        for link in ins.any_links:
            states = [alpha_fixed.get(a) for a in link.alphas]
            if any(s == 1.0 for s in states):
                lb[link.nu] = 1.0
            elif all(s == 0.0 for s in states):
                ub[link.nu] = 0.0
        for link in ins.sign_links:
            doms = [domains[pos_of[j]] for j in link.lams]
            want_pos = any(d.min > 0 for d in doms)
            want_neg = any(d.max < 0 for d in doms)
            if want_pos and want_neg:
                return None
            if want_pos:
                lb[link.delta] = 1.0
            elif want_neg:
                ub[link.delta] = 0.0

        m_max = self.cpos @ dmax + self.cneg @ dmin
        m_min = self.cpos @ dmin + self.cneg @ dmax
        forced_err = m_max < self.gamma_eff - 1e-9
        forced_ok = m_min >= self.gamma_eff - 1e-9
        lb[self.psi[forced_err]] = 1.0
        ub[self.psi[forced_ok]] = 0.0
        for i, val in psi_fix:
            if val == 1:
                lb[self.psi[i]] = 1.0
                ub[self.psi[i]] = 1.0
            else:
                if forced_err[i]:
                    return None
                lb[self.psi[i]] = 0.0
                ub[self.psi[i]] = 0.0

        if np.any(lb > ub + 1e-12):
            return None
        return lb, ub

    def repair_hint(self, x0, lb, ub) -> np.ndarray:
        """Project a warm-start hint into the node's box and lift the derived
        variables to row-feasible values so phase 1 has little to do."""
        x = np.clip(x0, lb, ub)
        lam_x = x[self.lam_vars]
        margins = self.coef @ lam_x
        needed = (self.gamma_eff - margins) / self.m_root
        psi = np.maximum(x[self.psi], np.minimum(needed, 1.0))
        x[self.psi] = np.clip(psi, lb[self.psi], ub[self.psi])
        if self._alpha_idx.size:
            alpha = np.abs(lam_x[self._alpha_of_lam]) / self._alpha_cap
            x[self._alpha_idx] = np.clip(
                np.maximum(alpha, x[self._alpha_idx]),
                lb[self._alpha_idx], ub[self._alpha_idx],
            )
        if self._beta_idx.size:
            x[self._beta_idx] = np.clip(
                np.abs(lam_x[self._beta_of_lam]),
                lb[self._beta_idx], ub[self._beta_idx],
            )
        for link in self.instance.def_links:
            if self.instance.kind == "scorecard":
                x[link.var] = sum(cf * x[idx] for idx, cf in link.terms)
        return x

    def node_lp(self, lb, ub, x0=None, start=None):
        """Solve the node relaxation: dual re-solve from the parent basis
        when one is inherited, primal crash from a repaired hint otherwise."""
        lp = LPProblem(c=self.obj, a=self.a, sense=self.sense, b=self.b,
                       lb=lb, ub=ub)
        if start is not None:
            partial: list = []
            sol = dual_solve_from_basis(lp, start[0], start[1],
                                        hint_out=partial)
            if sol is not None:
                return sol
            if partial:
                x0 = partial[0]
        if x0 is not None:
            x0 = self.repair_hint(x0, lb, ub)
        return simplex_solve(lp, x0=x0)

    # -- exact evaluation -----------------------------------------------------

    def evaluate(self, lam_ints) -> tuple[float, bool, np.ndarray]:
        x = decode_assignment(self.instance, lam_ints)
        ok, _ = check_feasible(self.instance, x)
        return assignment_objective(self.instance, x), ok, x

    def _penalty_full(self, lam: np.ndarray) -> tuple[float, bool]:
        """Objective minus the loss part, with the coefficient-only hard
        constraints (sign agreement, rules-per-feature cap) as a veto."""
        ins = self.instance
        body = lam[1:]
        if ins.kind == "scorecard":
            c0 = np.asarray(ins.c0)
            return float((body != 0) @ c0 + ins.eps * np.abs(body).sum()), True
        if ins.kind == "mofn":
            return float(self.obj[self.lam_vars] @ lam), True
        if ins.kind == "tiered":
            cost = {v: c for vals, c in ins.meta["tiers"] for v in vals}
            return float(sum(cost[int(v)] for v in body)), True
        groups = ins.meta["rule_groups"]
        c_f, c_t, r_max = ins.meta["c_f"], ins.meta["c_t"], ins.meta["r_max"]
        pen = float(ins.eps * np.abs(body).sum())
        for cols in groups.values():
            vals = [lam[j] for j in cols]
            nnz = sum(1 for v in vals if v != 0)
            if nnz > r_max:
                return np.inf, False
            if any(v > 0 for v in vals) and any(v < 0 for v in vals):
                return np.inf, False
            pen += c_f * (nnz > 0) + c_t * max(0, nnz - 1)
        return pen, True

    def _check_extra_rows(self, lam: np.ndarray, err: np.ndarray) -> bool:
        """Evaluate appended operational rows from (coefficients, errors)."""
        if not self.extra_rows:
            return True
        for row in self.extra_rows:
            val = 0.0
            known = True
            for idx, cf in zip(row.indices, row.coefs):
                if idx in self._psi_pos:
                    val += cf * err[self._psi_pos[idx]]
                elif idx in self._alpha_lam:
                    val += cf * (lam[self._lam_pos[self._alpha_lam[idx]]] != 0)
                elif idx in self._lam_pos:
                    val += cf * lam[self._lam_pos[idx]]
                else:
                    known = False
                    break
            if not known:
                x = decode_assignment(self.instance, lam)
                return bool(check_feasible(self.instance, x)[0])
            if row.sense == "<=" and val > row.rhs + 1e-9:
                return False
            if row.sense == ">=" and val < row.rhs - 1e-9:
                return False
            if row.sense == "==" and abs(val - row.rhs) > 1e-9:
                return False
        return True

    def quick_objective(self, lam: np.ndarray) -> tuple[float, bool]:
        """Exact objective + feasibility straight from the coefficients."""
        margins = self.coef @ lam
        err = (margins < self.instance.gamma - 1e-9).astype(np.float64)
        pen, ok = self._penalty_full(lam)
        if not ok or not self._check_extra_rows(lam, err):
            return np.inf, False
        return float(self.wvec @ err) + pen, True

    # -- heuristics -----------------------------------------------------------

    def polish(self, lam: np.ndarray, domains) -> np.ndarray:
        """Deterministic coordinate descent over the allowed value lists."""
        lam = lam.astype(np.float64).copy()
        best_obj, ok = self.quick_objective(lam)
        if not ok:
            return lam
        margins = self.coef @ lam
        for _ in range(POLISH_PASSES):
            improved = False
            for k in range(self.n_lam):
                d = domains[k]
                if d.singleton:
                    continue
                vals = np.array(d.values[d.lo: d.hi + 1], dtype=np.float64)
                base = margins - self.coef[:, k] * lam[k]
                cand = base[None, :] + vals[:, None] * self.coef[:, k][None, :]
                errs = cand < self.instance.gamma - 1e-9
                losses = errs @ self.wvec
                cur = lam[k]
                best_v, best_here = cur, best_obj
                for t, v in enumerate(vals):
                    if v == cur:
                        continue
                    lam[k] = v
                    pen, ok = self._penalty_full(lam)
                    total = losses[t] + pen
                    if ok and total < best_here - 1e-15 and self._check_extra_rows(
                        lam, errs[t].astype(np.float64)
                    ):
                        best_here, best_v = total, v
                lam[k] = best_v
                if best_v != cur:
                    margins = base + best_v * self.coef[:, k]
                    best_obj = best_here
                    improved = True
            if not improved:
                break
        return lam

    def scale_seeds(self, lam_lp: np.ndarray, domains) -> list[np.ndarray]:
        """Round the root-relaxation coefficients at several magnifications;
        the relaxation finds good directions at an arbitrary scale."""
        seeds = []
        mags = np.abs(lam_lp)
        if mags.max() < 1e-9:
            return seeds
        t_sat = max(
            (domains[k].max if lam_lp[k] >= 0 else -domains[k].min)
            / max(mags[k], 1e-9)
            for k in range(self.n_lam)
            if mags[k] > 1e-9
        )
        t_sat = float(np.clip(abs(t_sat), 1.0, 1e6))
        ts = sorted({1.0, *np.geomspace(0.5, t_sat, 16)})
        seen = set()
        for t in ts:
            cand = np.array(
                [domains[k].nearest(t * lam_lp[k]) for k in range(self.n_lam)],
                dtype=np.float64,
            )
            key = tuple(cand)
            if key not in seen:
                seen.add(key)
                seeds.append(cand)
        return seeds


def branch_and_bound(
    instance: IPInstance,
    time_limit: float | None = None,
    node_limit: int | None = None,
    gap_tolerance: float = 1e-9,
    keep_trace: bool = False,
) -> SolveResult:
    """Solve an instance to proven optimality or until the budget runs out.

    Fathoming uses an absolute slack of 1e-9 below the incumbent: distinct
    integer solutions differ in objective by far more than that for any
    sane penalty configuration, so status "optimal" is exact on the
    discrete objective lattice.
    """
    t0 = time.monotonic()
    eng = _Engine(instance, keep_trace)

    inc_obj = np.inf
    inc_lam: np.ndarray | None = None

    def try_incumbent(lam_vec: np.ndarray) -> bool:
        nonlocal inc_obj, inc_lam
        obj, ok = eng.quick_objective(lam_vec)
        if ok and obj < inc_obj - 1e-15:
            inc_obj = obj
            inc_lam = lam_vec.copy()
            return True
        return False

    def out_of_budget() -> bool:
        if node_limit is not None and nodes >= node_limit:
            return True
        if time_limit is not None and time.monotonic() - t0 > time_limit:
            return True
        return False

    def finish(status: str, lower: float) -> SolveResult:
        wall = time.monotonic() - t0
        if inc_lam is None:
            if status == "optimal":
                # the search completed without any integer point: proven
                # infeasible even though the relaxation was not
                status = "infeasible"
            elif status != "infeasible":
                status = "no-incumbent"
            return SolveResult(
                status=status, incumbent=None, incumbent_objective=np.inf,
                lower_bound=lower, gap=np.inf, nodes_explored=nodes,
                wall_time=wall, trace=eng.trace,
            )
        lam_ints = tuple(int(round(v)) for v in inc_lam)
        _, _, x_full = eng.evaluate(lam_ints)
        if status == "optimal":
            lower = inc_obj
        lower = min(lower, inc_obj)
        gap = (inc_obj - lower) / max(abs(inc_obj), 1e-10)
        model = decode_model(instance, lam_ints)
        model.metadata["solver_status"] = status
        model.metadata["gap"] = gap
        return SolveResult(
            status=status, incumbent=x_full, incumbent_objective=inc_obj,
            lower_bound=lower, gap=gap, nodes_explored=nodes, wall_time=wall,
            lambda_values=lam_ints, model=model, trace=eng.trace,
        )

    nodes = 0
    # incumbent seed (a): the all-zero model
    try_incumbent(np.zeros(eng.n_lam))

    root = eng.propagate(eng.domains0, ())
    if root is None:
        return finish("infeasible", np.inf)
    lb, ub = root
    lam0 = np.array([d.nearest(0.0) for d in eng.domains0], dtype=np.float64)
    sol = eng.node_lp(lb, ub, x0=decode_assignment(instance, lam0))
    nodes = 1
    if sol.status == "infeasible":
        return finish("infeasible", np.inf)
    if sol.status != "optimal":
        raise SimplexError(f"root relaxation ended with status {sol.status}")
    root_bound = sol.objective

    # seeds (b) and (c): nearest and scale-swept rounding of the root LP
    lam_lp = sol.x[eng.lam_vars]
    seeds = [np.array([eng.domains0[k].nearest(lam_lp[k])
                       for k in range(eng.n_lam)], dtype=np.float64)]
    seeds.extend(eng.scale_seeds(lam_lp, eng.domains0))
    for seed in seeds:
        try_incumbent(seed)
    if inc_lam is not None:
        try_incumbent(eng.polish(inc_lam, eng.domains0))

    heap: list = [(root_bound, 0, eng.domains0, (), 0, sol, None)]
    seq = 0

    while heap:
        if heap[0][0] >= inc_obj - PRUNE_EPS:
            return finish("optimal", inc_obj)
        if out_of_budget():
            lower = min(h[0] for h in heap)
            status = ("feasible-budget-exhausted" if inc_lam is not None
                      else "no-incumbent")
            return finish(status, lower)

        if nodes % PLUNGE_EVERY == 0 and len(heap) > 1:
            pick = max(range(len(heap)), key=lambda i: (heap[i][4], heap[i][1]))
            entry = heap[pick]
            heap[pick] = heap[-1]
            heap.pop()
            heapq.heapify(heap)
        else:
            entry = heapq.heappop(heap)
        bound_key, _, domains, psi_fix, depth, presolved, warm = entry
        if bound_key >= inc_obj - PRUNE_EPS:
            continue

        if presolved is None:
            prop = eng.propagate(domains, psi_fix)
            if prop is None:
                continue
            lb, ub = prop
            x0_hint, start_hint = warm if warm is not None else (None, None)
            sol = eng.node_lp(lb, ub, x0=x0_hint, start=start_hint)
            nodes += 1
            if sol.status == "infeasible":
                if keep_trace:
                    eng.trace.append(f"{nodes}\t{depth}\tinf\t{inc_obj:.9g}\tprune")
                continue
        else:
            sol = presolved

        bound = max(sol.objective, bound_key)
        if bound >= inc_obj - PRUNE_EPS:
            if keep_trace:
                eng.trace.append(
                    f"{nodes}\t{depth}\t{bound:.9g}\t{inc_obj:.9g}\tprune")
            continue

        lam_x = sol.x[eng.lam_vars]
        rounded = np.array([domains[k].nearest(lam_x[k])
                            for k in range(eng.n_lam)], dtype=np.float64)
        if try_incumbent(rounded):
            try_incumbent(eng.polish(rounded, eng.domains0))
            if heap and heap[0][0] >= inc_obj - PRUNE_EPS and bound >= inc_obj - PRUNE_EPS:
                return finish("optimal", inc_obj)

        branchable = [k for k in range(eng.n_lam) if not domains[k].singleton]
        if not branchable:
            continue  # fully resolved box; its LP value was exact

        fracs = np.abs(lam_x - rounded)
        frac_lam = [k for k in branchable if fracs[k] > INT_TOL]
        if frac_lam:
            k = max(frac_lam, key=lambda k: (fracs[k], eng.obj[eng.lam_vars[k]], -k))
            v = int(np.floor(lam_x[k]))
            v = min(max(v, domains[k].min), domains[k].max - 1)
            left, right = domains[k].split_le(v)
            children = [
                (tuple(sub if kk == k else domains[kk] for kk in range(eng.n_lam)),
                 psi_fix)
                for sub in (left, right) if sub is not None
            ]
            label = f"branch lam[{k}]<= {v}"
        else:
            psi_x = sol.x[eng.psi]
            fixed_ids = {i for i, _ in psi_fix}
            frac_psi = [
                i for i in range(len(psi_x))
                if INT_TOL < psi_x[i] < 1.0 - INT_TOL and i not in fixed_ids
            ]
            if frac_psi:
                i = max(frac_psi, key=lambda i: (min(psi_x[i], 1 - psi_x[i]), -i))
                children = [(domains, psi_fix + ((i, val),)) for val in (0, 1)]
                label = f"branch psi[{i}]"
            else:
                k = min(branchable, key=lambda k: (-eng.obj[eng.lam_vars[k]], k))
                v = int(round(lam_x[k]))
                v = min(max(v, domains[k].min), domains[k].max - 1)
                left, right = domains[k].split_le(v)
                children = [
                    (tuple(sub if kk == k else domains[kk]
                           for kk in range(eng.n_lam)), psi_fix)
                    for sub in (left, right) if sub is not None
                ]
                label = f"branch lam[{k}]<= {v} (integral)"

        if keep_trace:
            eng.trace.append(f"{nodes}\t{depth}\t{bound:.9g}\t{inc_obj:.9g}\t{label}")
        inherit = (sol.basis, sol.vstatus) if sol.vstatus is not None else None
        for doms, pfix in children:
            seq += 1
            heapq.heappush(heap,
                           (bound, seq, doms, pfix, depth + 1, None,
                            (sol.x, inherit)))

    return finish("optimal", inc_obj)
