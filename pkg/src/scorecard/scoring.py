"""Scoring systems: evaluation, norms, objectives, coprimality, rendering."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import ClassWeights, Dataset, INTERCEPT_NAME


class ScoringError(ValueError):
    pass


@dataclass(frozen=True)
class CoefficientSet:
    """Finite integer value set for each coefficient, intercept at index 0.

    Each per-index set must contain 0 so the zero model is always feasible.
    Sets are stored as sorted tuples of ints; contiguous [-L, L] ranges are
    the common case but explicit lists (sign constraints, tiered sets) are
    allowed.
    """

    values: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        norm = []
        for j, vals in enumerate(self.values):
            vals = tuple(sorted(int(v) for v in set(vals)))
            if not vals:
                raise ScoringError(f"coefficient set {j} is empty")
            if 0 not in vals:
                raise ScoringError(f"coefficient set {j} must contain 0")
            norm.append(vals)
        object.__setattr__(self, "values", tuple(norm))

    @staticmethod
    def uniform(p: int, lam: int = 10, intercept: int = 100) -> "CoefficientSet":
        """Symmetric ranges: intercept in [-intercept, intercept], others [-lam, lam]."""
        rng = tuple(range(-lam, lam + 1))
        return CoefficientSet((tuple(range(-intercept, intercept + 1)),) + (rng,) * p)

    @property
    def p(self) -> int:
        return len(self.values) - 1

    def lam(self, j: int) -> int:
        return max(abs(v) for v in self.values[j])

    def bounds(self, j: int) -> tuple[int, int]:
        return self.values[j][0], self.values[j][-1]

    def max_l1(self, include_intercept: bool = False) -> int:
        start = 0 if include_intercept else 1
        return sum(self.lam(j) for j in range(start, len(self.values)))

    def replace(self, j: int, vals) -> "CoefficientSet":
        out = list(self.values)
        out[j] = tuple(vals)
        return CoefficientSet(tuple(out))

    def with_sign(self, j: int, sign: int) -> "CoefficientSet":
        if sign > 0:
            keep = tuple(v for v in self.values[j] if v >= 0)
        else:
            keep = tuple(v for v in self.values[j] if v <= 0)
        return self.replace(j, keep)

    def pin_zero(self, j: int) -> "CoefficientSet":
        return self.replace(j, (0,))

    def size(self) -> int:
        total = 1
        for vals in self.values:
            total *= len(vals)
        return total


@dataclass(frozen=True)
class ScoringSystem:
    """Trained integer scoring system: intercept plus P feature coefficients."""

    intercept: int
    coefficients: tuple[int, ...]
    feature_names: tuple[str, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        coefs = tuple(int(c) for c in self.coefficients)
        names = tuple(self.feature_names)
        if len(names) == len(coefs):
            names = (INTERCEPT_NAME, *names)
        if len(names) != len(coefs) + 1:
            raise ScoringError("feature_names must cover intercept + coefficients")
        object.__setattr__(self, "intercept", int(self.intercept))
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "feature_names", names)

    @property
    def p(self) -> int:
        return len(self.coefficients)

    @property
    def vector(self) -> np.ndarray:
        return np.array((self.intercept, *self.coefficients), dtype=np.int64)

    @property
    def model_size(self) -> int:
        return norms(self)[0]

    def predict(self, x) -> int:
        return 1 if score(self, x) > 0 else -1


def score(model: ScoringSystem, x) -> float:
    """Return the full linear score lambda^T x, with x[0] = 1.

    Exact integer arithmetic whenever the feature vector is integer-valued;
    real-valued features fall back to float64 (documented tie hazard at 0).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.p + 1,):
        raise ScoringError(f"expected feature vector of length {model.p + 1}")
    if x[0] != 1.0:
        raise ScoringError("feature vector must have x[0] = 1")
    lam = model.vector
    if np.all(x == np.round(x)):
        return int(np.dot(lam, x.astype(np.int64)))
    return float(np.dot(lam.astype(np.float64), x))


def points(model: ScoringSystem, x) -> float:
    """Table points: the score contribution excluding the intercept."""
    return score(model, x) - model.intercept


def scores(model: ScoringSystem, dataset: Dataset) -> np.ndarray:
    if dataset.p != model.p:
        raise ScoringError("model/dataset dimension mismatch")
    return dataset.features @ model.vector.astype(np.float64)


def zero_one_loss(model: ScoringSystem, dataset: Dataset) -> tuple[int, float]:
    """(count, rate) of margins y * lambda^T x <= 0; ties count as errors."""
    margins = dataset.labels * scores(model, dataset)
    count = int(np.count_nonzero(margins <= 0))
    return count, count / dataset.normalizer


def weighted_loss(model: ScoringSystem, dataset: Dataset,
                  weights: ClassWeights) -> float:
    """(W+/N) * errors on positives + (W-/N) * errors on negatives."""
    margins = dataset.labels * scores(model, dataset)
    err = margins <= 0
    n = dataset.normalizer
    e_pos = int(np.count_nonzero(err & (dataset.labels == 1)))
    e_neg = int(np.count_nonzero(err & (dataset.labels == -1)))
    return (weights.w_pos / n) * e_pos + (weights.w_neg / n) * e_neg


def norms(model: ScoringSystem) -> tuple[int, int]:
    """(l0, l1) over the non-intercept coefficients only."""
    l0 = sum(1 for c in model.coefficients if c != 0)
    l1 = sum(abs(c) for c in model.coefficients)
    return l0, l1


def objective(model: ScoringSystem, dataset: Dataset, c0, eps: float,
              weights: ClassWeights | None = None) -> float:
    """Regularized loss: loss + sum_j C0_j 1[lambda_j != 0] + eps * l1.

    ``c0`` may be a scalar or a per-feature sequence of length P. With
    ``weights`` the class-weighted loss replaces the plain rate.
    """
    if weights is None:
        _, loss = zero_one_loss(model, dataset)
    else:
        loss = weighted_loss(model, dataset, weights)
    c0_vec = np.broadcast_to(np.asarray(c0, dtype=np.float64), (model.p,))
    l0_pen = float(sum(c for c, lam in zip(c0_vec, model.coefficients) if lam != 0))
    _, l1 = norms(model)
    return loss + l0_pen + eps * l1


def is_coprime(model: ScoringSystem) -> bool:
    """gcd over |intercept| and all |coefficients| equals 1.

    The all-zero model has no gcd; by convention it counts as coprime (with
    a warning) since the property only matters at optima of the penalized
    objective.
    """
    vals = [abs(model.intercept)] + [abs(c) for c in model.coefficients]
    g = 0
    for v in vals:
        g = math.gcd(g, v)
    if g == 0:
        warnings.warn("gcd undefined for the all-zero model; treating as coprime",
                      stacklevel=2)
        return True
    return g == 1


def render_table(model: ScoringSystem, threshold_note: str | None = None,
                 markdown: bool = False) -> str:
    """Deterministic add-the-points table for a scoring system.

    One row per nonzero coefficient, sorted by descending |coefficient| with
    ties broken by feature name; the intercept is folded into the headline
    threshold (predict positive iff points > -intercept).
    """
    threshold = -model.intercept
    subject = threshold_note if threshold_note else "Y = +1"
    headline = f"PREDICT {subject} IF SCORE > {threshold}"

    rows = [
        (name, coef)
        for name, coef in zip(model.feature_names[1:], model.coefficients)
        if coef != 0
    ]
    rows.sort(key=lambda nc: (-abs(nc[1]), nc[0]))

    if markdown:
        lines = [f"**{headline}**", "", "| # | feature | points |", "|---|---|---|"]
        for i, (name, coef) in enumerate(rows, start=1):
            lines.append(f"| {i} | {name} | {coef} |")
        lines.append(f"| | ADD POINTS FROM ROWS 1-{len(rows)} | SCORE |")
        return "\n".join(lines) + "\n"

    name_w = max([len(n) for n, _ in rows] + [24])
    pts_w = max([len(str(c)) for _, c in rows] + [2])
    lines = [headline, "=" * len(headline)]
    for i, (name, coef) in enumerate(rows, start=1):
        filler = "  ......" if i == 1 else "+ ......"
        lines.append(f"{i:>3}.  {name:<{name_w}}  {coef:>{pts_w}} points  {filler}")
    lines.append("-" * len(headline))
    if rows:
        add = f"ADD POINTS FROM ROWS 1-{len(rows)}"
        lines.append(f"      {add:<{name_w}}  {'SCORE':>{pts_w + 7}}  = ......")
    else:
        lines.append("      (no nonzero coefficients)  SCORE = 0")
    return "\n".join(lines) + "\n"


def save_model(model: ScoringSystem, path) -> None:
    payload = {
        "feature_names": list(model.feature_names),
        "intercept": model.intercept,
        "coefficients": list(model.coefficients),
        "coefficient_set_bounds": model.metadata.get("coefficient_set_bounds"),
        "c0": model.metadata.get("c0"),
        "eps": model.metadata.get("eps"),
        "solver_status": model.metadata.get("solver_status"),
        "gap": model.metadata.get("gap"),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_model(path) -> ScoringSystem:
    payload = json.loads(Path(path).read_text())
    meta = {
        k: payload.get(k)
        for k in ("coefficient_set_bounds", "c0", "eps", "solver_status", "gap")
    }
    return ScoringSystem(
        intercept=payload["intercept"],
        coefficients=tuple(payload["coefficients"]),
        feature_names=tuple(payload["feature_names"]),
        metadata={k: v for k, v in meta.items() if v is not None},
    )
