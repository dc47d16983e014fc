"""Exhaustive enumeration oracle for tiny instances.

Deliberately independent of the IP machinery: it evaluates the regularized
0-1 objective directly from the dataset, so it can certify the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import ClassWeights, Dataset
from ..formulate import (
    FormulationError,
    Hierarchy,
    IfThen,
    MaxFPR,
    MaxModelSize,
    MinTPR,
    PerFeaturePenalty,
    PinZero,
    Sign,
    _resolve,
)
from ..scoring import CoefficientSet

ENUM_BUDGET = 10_000_000
_CHUNK = 1 << 15


@dataclass(frozen=True)
class OracleResult:
    objective: float
    optima: tuple[tuple[int, ...], ...]
    searched: int


def exhaustive_oracle(
    dataset: Dataset,
    coeff_set: CoefficientSet,
    c0,
    eps: float,
    weights: ClassWeights | None = None,
    constraints: tuple | list = (),
    budget: int = ENUM_BUDGET,
) -> OracleResult:
    """Enumerate every coefficient vector in the set and return all optima.

    The objective is weighted-loss + sum_j C0_j 1[lambda_j != 0] + eps l1
    with the loss normalized by the dataset's loss normalizer. Operational
    constraints are evaluated directly on each candidate.
    """
    p = dataset.p
    if coeff_set.p != p:
        raise FormulationError("coefficient set does not match dataset width")
    c0_vec = np.broadcast_to(np.asarray(c0, dtype=np.float64), (p,)).copy()

    domains = [list(vals) for vals in coeff_set.values]
    specs = list(constraints)
    names = dataset.feature_names
    theta = None
    max_fp = None
    max_en_pos = None
    ifthen_rows = []
    hier_rows = []
    for spec in specs:
        if isinstance(spec, Sign):
            j = _resolve(spec.feature, names)
            domains[j] = [v for v in domains[j] if (v >= 0 if spec.sign > 0 else v <= 0)]
        elif isinstance(spec, PinZero):
            domains[_resolve(spec.feature, names)] = [0]
        elif isinstance(spec, PerFeaturePenalty):
            c0_vec[_resolve(spec.feature, names) - 1] = spec.c0
        elif isinstance(spec, MaxModelSize):
            theta = spec.theta
        elif isinstance(spec, MaxFPR):
            max_fp = int(np.floor(spec.gamma_fpr * dataset.n_neg + 1e-9))
        elif isinstance(spec, MinTPR):
            max_en_pos = int(np.floor((1.0 - spec.min_tpr) * dataset.n_pos + 1e-9))
        elif isinstance(spec, IfThen):
            ifthen_rows.append(
                ([_resolve(a, names) for a in spec.antecedents],
                 _resolve(spec.consequent, names))
            )
        elif isinstance(spec, Hierarchy):
            hier_rows.append(
                (_resolve(spec.leaf, names), [_resolve(nd, names) for nd in spec.nodes])
            )
        else:
            raise FormulationError(f"oracle cannot evaluate spec {spec!r}")

    sizes = [len(d) for d in domains]
    total = 1
    for s in sizes:
        total *= s
    if total > budget:
        raise FormulationError(
            f"search space has {total} points, above the {budget} budget"
        )

    if weights is None:
        w_pos = w_neg = 1.0
    else:
        w_pos, w_neg = weights.w_pos, weights.w_neg
    norm = dataset.normalizer
    y = dataset.labels
    x_t = dataset.features.T  # (P+1, N)
    pos_mask = y == 1
    neg_mask = ~pos_mask
    value_arrays = [np.asarray(d, dtype=np.float64) for d in domains]

    best = np.inf
    optima: list[tuple[int, ...]] = []
    for start in range(0, total, _CHUNK):
        count = min(_CHUNK, total - start)
        flat = np.arange(start, start + count)
        lam = np.empty((count, p + 1))
        rem = flat
        for j in range(p, -1, -1):
            rem, idx = np.divmod(rem, sizes[j])
            lam[:, j] = value_arrays[j][idx]

        margins = (lam @ x_t) * y  # (count, N)
        err = margins <= 0
        e_pos = err[:, pos_mask].sum(axis=1)
        e_neg = err[:, neg_mask].sum(axis=1)
        loss = (w_pos * e_pos + w_neg * e_neg) / norm
        body = lam[:, 1:]
        nz = body != 0
        obj = loss + nz @ c0_vec + eps * np.abs(body).sum(axis=1)

        ok = np.ones(count, dtype=bool)
        if theta is not None:
            ok &= nz.sum(axis=1) <= theta
        if max_fp is not None:
            ok &= e_neg <= max_fp
        if max_en_pos is not None:
            ok &= e_pos <= max_en_pos
        for ants, cons in ifthen_rows:
            ok &= nz[:, [a - 1 for a in ants]].sum(axis=1) <= len(ants) * nz[:, cons - 1]
        for leaf, nds in hier_rows:
            for nd in nds:
                ok &= ~(nz[:, leaf - 1] & ~nz[:, nd - 1])
        if not ok.any():
            continue
        obj = np.where(ok, obj, np.inf)

        chunk_best = float(obj.min())
        if chunk_best < best:
            best = chunk_best
            optima = []
        if chunk_best <= best:
            for i in np.flatnonzero(obj == best):
                optima.append(tuple(int(v) for v in lam[i]))

    if not optima:
        return OracleResult(objective=np.inf, optima=(), searched=total)
    return OracleResult(objective=best, optima=tuple(optima), searched=total)
