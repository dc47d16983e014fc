"""Training-data reduction via the LP-relaxation surrogate.

Solve the relaxation once, then re-solve it N times with a constraint that
flips each example's predicted sign in turn. Examples whose flipped variant
leaves the surrogate's epsilon-level set are classified identically by every
model in the level set, so they can be dropped without changing the
optimizers of the original problem (for epsilon at least the optimum's gap).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .formulate import IPInstance, LinearConstraint, decode_assignment, \
    assignment_objective
from .milp.simplex import LPProblem, relaxation, simplex_solve
from .scoring import ScoringSystem


class ReductionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReductionReport:
    epsilon: float
    surrogate_objective: float
    verdicts: tuple[str, ...]        # per example: "kept" | "removed" | "tied"
    fixed_signs: tuple[int, ...]     # baseline sign per example
    removed_fraction: float
    m: int                           # |D_M|, examples kept
    fixed_loss: float                # loss the removed examples contribute
                                     # to every level-set model (weighted, /N)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "surrogate_objective": self.surrogate_objective,
            "verdicts": list(self.verdicts),
            "fixed_signs": list(self.fixed_signs),
            "removed_fraction": self.removed_fraction,
            "m": self.m,
            "fixed_loss": self.fixed_loss,
        }


def flip_constraint(instance: IPInstance, i: int, baseline_sign: int) -> LinearConstraint:
    """Row forcing example i to the opposite side of its baseline sign.

    The strict inequality "flipped score < 0" is realized as
    sign * score <= -gamma, reusing the formulation's own margin constant.
    """
    if baseline_sign not in (-1, 1):
        raise ReductionError("baseline sign must be -1 or +1")
    x_row = instance.loss.coef[i] * instance.loss.labels[i]  # back to raw x_i
    return LinearConstraint(
        name=f"flip[{i}]",
        indices=tuple(instance.lambda_vars),
        coefs=tuple(float(baseline_sign) * x_row),
        sense="<=",
        rhs=-instance.gamma,
    )


def _lp_with_extra(instance: IPInstance, base: LPProblem,
                   row: LinearConstraint) -> LPProblem:
    extra = np.zeros((1, base.a.shape[1]))
    for idx, cf in zip(row.indices, row.coefs):
        extra[0, idx] += cf
    return LPProblem(
        c=base.c,
        a=np.vstack([base.a, extra]),
        sense=np.concatenate([base.sense, np.array(["L"])]),
        b=np.concatenate([base.b, np.array([row.rhs])]),
        lb=base.lb,
        ub=base.ub,
    )


def reduce_dataset(
    dataset: Dataset,
    instance_builder,
    epsilon: float,
) -> tuple[Dataset, ReductionReport]:
    """Run the reduction algorithm and return (reduced dataset, report).

    ``instance_builder`` maps a Dataset to an IPInstance; the surrogate is
    that instance's LP relaxation. The reduced dataset keeps the original
    loss normalizer so objective values on it remain comparable with the
    full-data problem (removed examples contribute the constant recorded
    in ``fixed_loss``).
    """
    if epsilon < 0:
        raise ReductionError("epsilon must be nonnegative")
    instance = instance_builder(dataset)
    if instance.n_train != dataset.n:
        raise ReductionError("instance does not match dataset")
    base = relaxation(instance)
    root = simplex_solve(base)
    if root.status != "optimal":
        raise ReductionError(f"surrogate relaxation is {root.status}")
    z_star = root.objective
    lam_lp = root.x[list(instance.lambda_vars)]
    raw_scores = (instance.loss.coef * instance.loss.labels[:, None]) @ lam_lp

    verdicts: list[str] = []
    signs: list[int] = []
    keep_rows: list[int] = []
    fixed_loss = 0.0
    w_pos, w_neg = instance.weights
    for i in range(dataset.n):
        if abs(raw_scores[i]) <= 1e-9:
            # ambiguous baseline: never fix a sign from a tie
            verdicts.append("tied")
            signs.append(-1)
            keep_rows.append(i)
            continue
        sign = 1 if raw_scores[i] > 0 else -1
        signs.append(sign)
        variant = simplex_solve(_lp_with_extra(instance, base,
                                               flip_constraint(instance, i, sign)))
        if variant.status == "optimal":
            removed = variant.objective > z_star + epsilon
        elif variant.status == "infeasible":
            removed = True  # no classifier in the relaxed set can flip i
        else:
            removed = False  # surface conservatively as kept
        if removed:
            verdicts.append("removed")
            y_i = int(dataset.labels[i])
            if y_i != sign:
                w = w_pos if y_i == 1 else w_neg
                fixed_loss += w / instance.normalizer
        else:
            verdicts.append("kept")
            keep_rows.append(i)

    reduced = dataset.subset(keep_rows, keep_normalizer=True)
    report = ReductionReport(
        epsilon=float(epsilon),
        surrogate_objective=float(z_star),
        verdicts=tuple(verdicts),
        fixed_signs=tuple(signs),
        removed_fraction=(dataset.n - len(keep_rows)) / dataset.n,
        m=len(keep_rows),
        fixed_loss=fixed_loss,
    )
    return reduced, report


def epsilon_bounds(
    instance: IPInstance,
    feasible_model: ScoringSystem | None = None,
) -> tuple[float | None, float]:
    """(epsilon from the supplied model, epsilon from the zero model).

    Both are gaps between an integer-feasible objective value and the LP
    relaxation optimum: the zero model needs no computation to exhibit,
    while a certified optimum gives the smallest usable width.
    """
    base = relaxation(instance)
    root = simplex_solve(base)
    if root.status != "optimal":
        raise ReductionError(f"surrogate relaxation is {root.status}")
    z_star = root.objective

    zero = decode_assignment(instance, np.zeros(len(instance.lambda_vars)))
    eps_max = assignment_objective(instance, zero) - z_star
    eps_model = None
    if feasible_model is not None:
        lam = (feasible_model.intercept, *feasible_model.coefficients)
        x = decode_assignment(instance, np.asarray(lam, dtype=np.float64))
        eps_model = assignment_objective(instance, x) - z_star
    return (
        None if eps_model is None else max(0.0, float(eps_model)),
        max(0.0, float(eps_max)),
    )
