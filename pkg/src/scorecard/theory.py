"""Resolution and generalization bound calculators, plus the counting
oracles for sparse and coprime hypothesis classes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np


class TheoryError(ValueError):
    pass


ENUM_BUDGET = 20_000_000


@dataclass(frozen=True)
class MarginProfile:
    """Margins of a real-coefficient baseline classifier on training data.

    ``rho`` has length P (no intercept; callers who want one treat it as an
    ordinary coordinate with a constant feature). Margins are the distances
    |rho^T x| / ||rho||_2 per example.
    """

    rho: np.ndarray
    x: np.ndarray                 # (N, P)
    margins: np.ndarray           # (N,) nonnegative
    norms: np.ndarray             # (N,) row magnitudes ||x_i||_2

    @staticmethod
    def from_data(x, rho) -> "MarginProfile":
        x = np.asarray(x, dtype=np.float64)
        rho = np.asarray(rho, dtype=np.float64)
        if x.ndim != 2 or rho.shape != (x.shape[1],):
            raise TheoryError("x must be (N, P) and rho length P")
        nrm = float(np.linalg.norm(rho))
        if nrm == 0.0:
            raise TheoryError("baseline coefficients must be nonzero")
        margins = np.abs(x @ rho) / nrm
        return MarginProfile(rho=rho, x=x, margins=margins,
                             norms=np.linalg.norm(x, axis=1))

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def gamma_k(self, k: int) -> float:
        """k-th smallest margin (1-indexed)."""
        if not 1 <= k <= len(self.margins):
            raise TheoryError("k out of range")
        return float(np.sort(self.margins)[k - 1])

    def x_k(self, k: int) -> float:
        """Largest row magnitude among examples with margin >= gamma_(k)."""
        g = self.gamma_k(k)
        keep = self.margins >= g
        return float(self.norms[keep].max())


def min_resolution(profile: MarginProfile, k: int = 1) -> float:
    """Resolution threshold X_(k) sqrt(P) / (2 gamma_(k)).

    Any integer bound strictly above it admits a rounded model whose 0-1
    loss exceeds the baseline's by at most k - 1 (k = 1: no increase).
    """
    g = profile.gamma_k(k)
    if g <= 0.0:
        raise TheoryError("margin degenerate: an example lies on the hyperplane")
    return profile.x_k(k) * math.sqrt(profile.p) / (2.0 * g)


def smallest_admissible_lambda(profile: MarginProfile, k: int = 1) -> int:
    """Smallest integer strictly above the resolution threshold."""
    bound = min_resolution(profile, k)
    lam = int(math.floor(bound)) + 1
    return lam


def round_at_resolution(rho, lambda_cap: int) -> np.ndarray:
    """Round the unit-normalized baseline onto the integer grid of width
    1/lambda_cap: lambda_j = nearest integer to cap * rho_j / ||rho||_2,
    halfway ties toward zero. Guarantees |lambda_j| <= cap."""
    rho = np.asarray(rho, dtype=np.float64)
    nrm = float(np.linalg.norm(rho))
    if nrm == 0.0:
        raise TheoryError("baseline coefficients must be nonzero")
    if lambda_cap < 1:
        raise TheoryError("lambda_cap must be >= 1")
    target = lambda_cap * rho / nrm
    lam = np.floor(np.abs(target) + 0.5)
    ties = np.abs(np.abs(target) - (np.floor(np.abs(target)) + 0.5)) < 1e-12
    lam[ties] = np.floor(np.abs(target[ties]))  # halfway: toward zero
    lam = np.sign(target) * lam
    return lam.astype(np.int64)


def occam_bound(hypothesis_count: int, delta: float, n: int) -> float:
    """Uniform deviation bound sqrt((ln |H| - ln delta) / (2N)).

    Natural logarithms; the bound's base is a convention and only rescales
    the constant.
    """
    if hypothesis_count < 1:
        raise TheoryError("hypothesis count must be >= 1")
    if not 0.0 < delta < 1.0:
        raise TheoryError("delta must lie in (0, 1)")
    if n < 1:
        raise TheoryError("n must be >= 1")
    log_count = _log_big(hypothesis_count)
    return math.sqrt((log_count - math.log(delta)) / (2.0 * n))


def _log_big(value: int) -> float:
    # math.log handles arbitrary-precision ints natively
    return math.log(value)


def sparse_hypothesis_count(p: int, lambda_cap: int, c0: float,
                            include_intercept: int | None = None) -> int:
    """Number of coefficient vectors in {-cap..cap}^P with at most
    floor(1/C0) nonzeros: sum_k C(P,k) (2 cap)^k.

    Optimizing the penalized objective can never use more nonzeros, since
    the zero model already achieves objective 1. ``include_intercept``
    multiplies by the size of an unpenalized intercept set when given.
    """
    if c0 <= 0:
        raise TheoryError("c0 must be positive")
    if p < 0 or lambda_cap < 0:
        raise TheoryError("p and lambda_cap must be nonnegative")
    k_max = min(p, int(math.floor(1.0 / c0)))
    total = 0
    for k in range(k_max + 1):
        total += math.comb(p, k) * (2 * lambda_cap) ** k
    if include_intercept is not None:
        total *= 2 * include_intercept + 1
    return total


def coprime_count(p: int, lambda_cap: int, budget: int = ENUM_BUDGET) -> int:
    """Count vectors z in {-cap..cap}^P with gcd of |entries| equal to 1."""
    if p < 1:
        raise TheoryError("p must be >= 1")
    total = (2 * lambda_cap + 1) ** p
    if p * total > budget:
        raise TheoryError(f"enumeration of {total} points over budget {budget}")
    count = 0
    for z in product(range(-lambda_cap, lambda_cap + 1), repeat=p):
        g = 0
        for v in z:
            g = math.gcd(g, abs(v))
        if g == 1:
            count += 1
    return count


def coprime_density(p: int, lambda_cap: int, budget: int = ENUM_BUDGET) -> float:
    return coprime_count(p, lambda_cap, budget) / (2 * lambda_cap + 1) ** p


def farey_count(p: int, level: int, budget: int = ENUM_BUDGET) -> int:
    """Count Farey points of the given level in [0, 1)^P: points lam/q with
    the stacked vector (lam, q) coprime and 1 <= q <= level.

    Lowest-terms representations are unique, so counting coprime stacked
    vectors counts distinct points.
    """
    if p < 1 or level < 1:
        raise TheoryError("p and level must be >= 1")
    work = sum(q ** p for q in range(1, level + 1))
    if work * p > budget:
        raise TheoryError(f"enumeration of {work} points over budget {budget}")
    count = 0
    for q in range(1, level + 1):
        for lam in product(range(q), repeat=p):
            g = q
            for v in lam:
                g = math.gcd(g, v)
            if g == 1:
                count += 1
    return count
