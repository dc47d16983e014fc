"""Build IP instances: the core 0-1-loss formulation, operational
constraints, and the tiered / rule-table / threshold-rule variants."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .data import ClassWeights, Dataset
from .scoring import CoefficientSet, ScoringSystem

FEAS_TOL = 1e-9


class FormulationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# instance containers


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str           # "integer" | "binary" | "continuous"
    lower: float
    upper: float
    role: str           # coefficient | loss | penalty | l0 | l1 | selector |
                        # feature_use | rule_count | sign
    obj: float = 0.0
    domain: tuple[int, ...] | None = None  # explicit allowed ints (coefficients)


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    indices: tuple[int, ...]
    coefs: tuple[float, ...]
    sense: str          # "<=" | ">=" | "=="
    rhs: float


@dataclass(frozen=True)
class LossBlock:
    """Loss rows in structural form: psi_i = 1[margin_i < gamma] at integer
    coefficients, margin_i = sum_k coef[i, k] * lambda_k."""

    psi: tuple[int, ...]
    lam: tuple[int, ...]
    coef: np.ndarray        # (N, L), equals y_i * x_i per lambda variable
    labels: np.ndarray      # (N,)

    def __post_init__(self):
        c = np.asarray(self.coef, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        c.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "coef", c)
        object.__setattr__(self, "labels", y)


@dataclass(frozen=True)
class ZeroLink:          # alpha = 1[lambda != 0]
    alpha: int
    lam: int


@dataclass(frozen=True)
class AbsLink:           # beta = |lambda|
    beta: int
    lam: int


@dataclass(frozen=True)
class SelectorLink:      # u = 1[lambda == value]
    u: int
    lam: int
    value: int


@dataclass(frozen=True)
class AnyLink:           # nu = 1[any linked alpha = 1]
    nu: int
    alphas: tuple[int, ...]


@dataclass(frozen=True)
class SignLink:          # delta = 1[group is nonnegative]
    delta: int
    lams: tuple[int, ...]


@dataclass(frozen=True)
class MaxZeroLink:       # tau = max(0, sum(alphas) - 1)
    tau: int
    alphas: tuple[int, ...]


@dataclass(frozen=True)
class DefLink:           # var = sum(coef * value) over terms
    var: int
    terms: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class IPInstance:
    """A mixed-integer instance plus the structural links that let the
    solver decode derived variables once the coefficients are fixed."""

    kind: str
    variables: tuple[Variable, ...]
    constraints: tuple[LinearConstraint, ...]
    gamma: float
    big_m: np.ndarray
    c0: tuple[float, ...]
    eps: float
    weights: tuple[float, float]
    n_train: int
    normalizer: int
    loss: LossBlock
    lambda_vars: tuple[int, ...]
    feature_names: tuple[str, ...]
    zero_links: tuple[ZeroLink, ...] = ()
    abs_links: tuple[AbsLink, ...] = ()
    selector_links: tuple[SelectorLink, ...] = ()
    any_links: tuple[AnyLink, ...] = ()
    sign_links: tuple[SignLink, ...] = ()
    maxzero_links: tuple[MaxZeroLink, ...] = ()
    def_links: tuple[DefLink, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        m = np.asarray(self.big_m, dtype=np.float64)
        m.flags.writeable = False
        object.__setattr__(self, "big_m", m)

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def objective_vector(self) -> np.ndarray:
        return np.array([v.obj for v in self.variables], dtype=np.float64)

    def var_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([v.lower for v in self.variables], dtype=np.float64)
        hi = np.array([v.upper for v in self.variables], dtype=np.float64)
        return lo, hi

    def lambda_domains(self) -> tuple[tuple[int, ...], ...]:
        doms = []
        for idx in self.lambda_vars:
            v = self.variables[idx]
            if v.domain is not None:
                doms.append(v.domain)
            else:
                doms.append(tuple(range(int(v.lower), int(v.upper) + 1)))
        return tuple(doms)

    def margin_is_integral(self) -> bool:
        return bool(np.all(self.loss.coef == np.round(self.loss.coef)))

    def with_constraints(self, extra: list[LinearConstraint]) -> "IPInstance":
        return replace(self, constraints=self.constraints + tuple(extra))


# ---------------------------------------------------------------------------
# operational constraint specs


@dataclass(frozen=True)
class MaxFPR:
    gamma_fpr: float


@dataclass(frozen=True)
class MinTPR:
    min_tpr: float


@dataclass(frozen=True)
class MaxModelSize:
    theta: int


@dataclass(frozen=True)
class Sign:
    feature: int | str
    sign: int


@dataclass(frozen=True)
class IfThen:
    antecedents: tuple
    consequent: int | str


@dataclass(frozen=True)
class Hierarchy:
    leaf: int | str
    nodes: tuple


@dataclass(frozen=True)
class PerFeaturePenalty:
    feature: int | str
    c0: float


@dataclass(frozen=True)
class PinZero:
    feature: int | str


ConstraintSpec = (
    MaxFPR | MinTPR | MaxModelSize | Sign | IfThen | Hierarchy
    | PerFeaturePenalty | PinZero
)


def _resolve(feature, names: tuple[str, ...]) -> int:
    """Map a feature name or 1-based index to its column index (1..P)."""
    if isinstance(feature, str):
        if feature not in names:
            raise FormulationError(f"unknown feature {feature!r}")
        j = names.index(feature)
        if j == 0:
            raise FormulationError("constraints may not target the intercept")
        return j
    j = int(feature)
    if not 1 <= j < len(names):
        raise FormulationError(f"feature index {j} out of range 1..{len(names) - 1}")
    return j


# ---------------------------------------------------------------------------
# scalar helpers


def big_m_loss(dataset: Dataset, coeff_set: CoefficientSet, gamma: float) -> np.ndarray:
    """Per-example Big-M: M_i = max over the coefficient set of
    (gamma - y_i lambda^T x_i), computed coordinatewise from the set bounds."""
    if gamma <= 0:
        raise FormulationError("gamma must be positive")
    if coeff_set.p != dataset.p:
        raise FormulationError("coefficient set does not match dataset width")
    yx = dataset.labels[:, None] * dataset.features  # (N, P+1)
    lo = np.array([coeff_set.bounds(j)[0] for j in range(dataset.p + 1)], dtype=float)
    hi = np.array([coeff_set.bounds(j)[1] for j in range(dataset.p + 1)], dtype=float)
    worst = np.maximum(-yx * lo, -yx * hi)  # max over lambda_j of -y x lambda
    return gamma + worst.sum(axis=1)


def default_gamma(dataset: Dataset) -> float:
    """Margin constant 0.1; warns when features are not all 0/1 valued,
    since the value then embeds an assumption about feature scale."""
    body = dataset.features[:, 1:]
    if not np.all(np.isin(body, (0.0, 1.0))):
        warnings.warn(
            "features are not all binary; margin gamma=0.1 assumes scores "
            "change in steps of at least 0.1",
            stacklevel=2,
        )
    return 0.1


def default_epsilon(c0: float, n: int, coeff_set: CoefficientSet) -> float:
    """Half the l1-penalty bound that guarantees the penalty only breaks
    ties: eps = 0.5 * min(1/N, C0) / max_{lambda in L} ||lambda||_1, the
    max taken over non-intercept coordinates (the intercept is unpenalized)."""
    if c0 <= 0 or n < 1:
        raise FormulationError("need c0 > 0 and n >= 1")
    denom = coeff_set.max_l1(include_intercept=False)
    if denom == 0:
        return 0.0
    return 0.5 * min(1.0 / n, float(c0)) / denom


def missing_data_penalty(c0: float, m_missing: int, n: int) -> float:
    """Penalty adjustment for a feature with M imputed values: C0 + M/N."""
    if not 0 <= m_missing <= n:
        raise FormulationError("need 0 <= m_missing <= n")
    return float(c0) + m_missing / n


# ---------------------------------------------------------------------------
# core scoring-system builder


def build_scorecard(
    dataset: Dataset,
    c0,
    eps: float | None = None,
    gamma: float | None = None,
    coeff_set: CoefficientSet | None = None,
    weights: ClassWeights | None = None,
    constraints: tuple | list = (),
) -> IPInstance:
    """Encode the 0-1-loss + l0 + tiny-l1 objective over an integer
    coefficient set, with any operational constraints appended.

    Rows per the formulation: N Big-M loss rows, P penalty definitions
    Phi_j = C0_j alpha_j + eps beta_j, and the l0 / l1 linking inequalities.
    The intercept is never penalized.
    """
    p = dataset.p
    coeff_set = coeff_set or CoefficientSet.uniform(p)
    if coeff_set.p != p:
        raise FormulationError("coefficient set does not match dataset width")
    if gamma is None:
        gamma = default_gamma(dataset)
    if np.isscalar(c0):
        c0_vec = [float(c0)] * p
    else:
        c0_vec = [float(v) for v in c0]
        if len(c0_vec) != p:
            raise FormulationError("c0 vector must have length P")
    if any(v <= 0 for v in c0_vec):
        raise FormulationError("c0 must be positive")

    specs = list(constraints)
    names = dataset.feature_names
    for spec in specs:
        if isinstance(spec, Sign):
            j = _resolve(spec.feature, names)
            coeff_set = coeff_set.with_sign(j, spec.sign)
        elif isinstance(spec, PinZero):
            j = _resolve(spec.feature, names)
            coeff_set = coeff_set.pin_zero(j)
        elif isinstance(spec, PerFeaturePenalty):
            j = _resolve(spec.feature, names)
            if spec.c0 <= 0:
                raise FormulationError("per-feature penalty must be positive")
            c0_vec[j - 1] = float(spec.c0)

    if eps is None:
        eps = default_epsilon(min(c0_vec), dataset.n, coeff_set)
    else:
        bound = 2.0 * default_epsilon(min(c0_vec), dataset.n, coeff_set)
        if bound and eps >= bound:
            warnings.warn(
                f"eps={eps:g} is not below the tie-breaking bound {bound:g}; "
                "the l1 term may trade off against accuracy or sparsity",
                stacklevel=2,
            )
    if weights is None:
        weights = ClassWeights.uniform()
        w_pos = w_neg = 1.0  # unweighted objective: plain 1/N per example
    else:
        w_pos, w_neg = weights.w_pos, weights.w_neg
        if abs(w_pos + w_neg - 1.0) > 1e-9:
            warnings.warn("class weights do not sum to 1", stacklevel=2)

    n = dataset.n
    norm = dataset.normalizer
    big_m = big_m_loss(dataset, coeff_set, gamma)

    variables: list[Variable] = []
    # lambda_0 .. lambda_P
    for j in range(p + 1):
        dom = coeff_set.values[j]
        variables.append(
            Variable(
                name=f"lam[{j}]", kind="integer", lower=dom[0], upper=dom[-1],
                role="coefficient", obj=0.0, domain=dom,
            )
        )
    lam_idx = tuple(range(p + 1))
    # psi_i
    psi_idx = []
    for i in range(n):
        w = w_pos if dataset.labels[i] == 1 else w_neg
        psi_idx.append(len(variables))
        variables.append(
            Variable(name=f"psi[{i}]", kind="binary", lower=0.0, upper=1.0,
                     role="loss", obj=w / norm)
        )
    # alpha_j, beta_j, Phi_j (j = 1..P)
    alpha_idx, beta_idx, phi_idx = [], [], []
    for j in range(1, p + 1):
        alpha_idx.append(len(variables))
        variables.append(
            Variable(name=f"alpha[{j}]", kind="binary", lower=0.0, upper=1.0,
                     role="l0", obj=c0_vec[j - 1])
        )
    for j in range(1, p + 1):
        beta_idx.append(len(variables))
        variables.append(
            Variable(name=f"beta[{j}]", kind="continuous", lower=0.0,
                     upper=float(coeff_set.lam(j)), role="l1", obj=eps)
        )
    for j in range(1, p + 1):
        phi_idx.append(len(variables))
        variables.append(
            Variable(name=f"phi[{j}]", kind="continuous", lower=0.0,
                     upper=c0_vec[j - 1] + eps * coeff_set.lam(j),
                     role="penalty", obj=0.0)
        )

    rows: list[LinearConstraint] = []
    yx = dataset.labels[:, None] * dataset.features
    for i in range(n):
        rows.append(
            LinearConstraint(
                name=f"loss[{i}]",
                indices=(psi_idx[i], *lam_idx),
                coefs=(float(big_m[i]), *(float(v) for v in yx[i])),
                sense=">=",
                rhs=gamma,
            )
        )
    for j in range(1, p + 1):
        lamj = coeff_set.lam(j)
        a, b, f = alpha_idx[j - 1], beta_idx[j - 1], phi_idx[j - 1]
        rows.append(LinearConstraint(f"l0lo[{j}]", (j, a), (1.0, float(lamj)), ">=", 0.0))
        rows.append(LinearConstraint(f"l0hi[{j}]", (j, a), (-1.0, float(lamj)), ">=", 0.0))
        rows.append(LinearConstraint(f"l1lo[{j}]", (b, j), (1.0, 1.0), ">=", 0.0))
        rows.append(LinearConstraint(f"l1hi[{j}]", (b, j), (1.0, -1.0), ">=", 0.0))
        rows.append(
            LinearConstraint(
                f"pen[{j}]", (f, a, b), (1.0, -c0_vec[j - 1], -eps), "==", 0.0
            )
        )

    instance = IPInstance(
        kind="scorecard",
        variables=tuple(variables),
        constraints=tuple(rows),
        gamma=gamma,
        big_m=big_m,
        c0=tuple(c0_vec),
        eps=float(eps),
        weights=(w_pos, w_neg),
        n_train=n,
        normalizer=norm,
        loss=LossBlock(psi=tuple(psi_idx), lam=lam_idx, coef=yx,
                       labels=dataset.labels.copy()),
        lambda_vars=lam_idx,
        feature_names=names,
        zero_links=tuple(ZeroLink(alpha_idx[j - 1], j) for j in range(1, p + 1)),
        abs_links=tuple(AbsLink(beta_idx[j - 1], j) for j in range(1, p + 1)),
        def_links=tuple(
            DefLink(phi_idx[j - 1], ((alpha_idx[j - 1], c0_vec[j - 1]),
                                     (beta_idx[j - 1], eps)))
            for j in range(1, p + 1)
        ),
        meta={"coefficient_set": coeff_set},
    )

    extra: list[LinearConstraint] = []
    for spec in specs:
        if isinstance(spec, (Sign, PinZero, PerFeaturePenalty)):
            continue  # already folded into domains / objective
        if isinstance(spec, MaxFPR):
            instance = add_max_fpr(instance, spec.gamma_fpr)
        elif isinstance(spec, MinTPR):
            extra.append(_min_tpr_row(instance, spec.min_tpr))
        elif isinstance(spec, MaxModelSize):
            if not 0 <= spec.theta <= p:
                raise FormulationError("model-size cap must lie in 0..P")
            extra.append(
                LinearConstraint(
                    "maxsize", tuple(alpha_idx), (1.0,) * p, "<=", float(spec.theta)
                )
            )
        elif isinstance(spec, IfThen):
            ants = [_resolve(a, names) for a in spec.antecedents]
            cons = _resolve(spec.consequent, names)
            idx = tuple(alpha_idx[a - 1] for a in ants) + (alpha_idx[cons - 1],)
            coefs = (1.0,) * len(ants) + (-float(len(ants)),)
            extra.append(LinearConstraint("ifthen", idx, coefs, "<=", 0.0))
        elif isinstance(spec, Hierarchy):
            leaf = _resolve(spec.leaf, names)
            for node in spec.nodes:
                nd = _resolve(node, names)
                extra.append(
                    LinearConstraint(
                        f"hierarchy[{leaf},{nd}]",
                        (alpha_idx[leaf - 1], alpha_idx[nd - 1]),
                        (1.0, -1.0), "<=", 0.0,
                    )
                )
        else:
            raise FormulationError(f"unknown constraint spec {spec!r}")
    if extra:
        instance = instance.with_constraints(extra)
    return instance


def _min_tpr_row(instance: IPInstance, min_tpr: float) -> LinearConstraint:
    if not 0.0 < min_tpr <= 1.0:
        raise FormulationError("min TPR must lie in (0, 1]")
    pos = [p for p, y in zip(instance.loss.psi, instance.loss.labels) if y == 1]
    if not pos:
        raise FormulationError("no positive examples for a TPR constraint")
    budget = float(np.floor((1.0 - min_tpr) * len(pos) + FEAS_TOL))
    return LinearConstraint("mintpr", tuple(pos), (1.0,) * len(pos), "<=", budget)


def add_max_fpr(instance: IPInstance, gamma_fpr: float,
                dataset: Dataset | None = None) -> IPInstance:
    """Append sum of negative-example loss indicators <= floor(g * N-).

    Ties at margin 0 count as false positives, which is the conservative
    reading of the strict inequality in the loss-constraint form.
    """
    if not 0.0 < gamma_fpr < 1.0:
        raise FormulationError("max FPR must lie in (0, 1)")
    neg = [p for p, y in zip(instance.loss.psi, instance.loss.labels) if y == -1]
    if not neg:
        raise FormulationError("no negative examples for an FPR constraint")
    rhs = float(np.floor(gamma_fpr * len(neg) + FEAS_TOL))
    row = LinearConstraint("maxfpr", tuple(neg), (1.0,) * len(neg), "<=", rhs)
    return instance.with_constraints([row])


# ---------------------------------------------------------------------------
# tiered-coefficient variant


def build_tiered(
    dataset: Dataset,
    interpretability_sets: list[tuple[tuple[int, ...], float]],
    gamma: float | None = None,
    weights: ClassWeights | None = None,
    intercept_values: tuple[int, ...] | None = None,
) -> IPInstance:
    """Tiered coefficient sets with per-tier penalties.

    ``interpretability_sets`` is a list of (values, cost) pairs with mutually
    exclusive value sets and strictly increasing costs. Every coefficient
    (including the intercept) picks exactly one value via binary selectors;
    only non-intercept selectors are penalized.
    """
    sets = [(tuple(sorted(int(v) for v in vals)), float(cost))
            for vals, cost in interpretability_sets]
    seen: set[int] = set()
    for vals, _ in sets:
        if seen & set(vals):
            raise FormulationError("interpretability sets must be mutually exclusive")
        seen |= set(vals)
    costs = [c for _, c in sets]
    if any(b <= a for a, b in zip(costs, costs[1:])):
        raise FormulationError("tier costs must be strictly increasing")
    if 0 not in seen:
        raise FormulationError("some tier must contain 0")

    if gamma is None:
        gamma = default_gamma(dataset)
    if weights is None:
        w_pos = w_neg = 1.0
    else:
        w_pos, w_neg = weights.w_pos, weights.w_neg

    p, n = dataset.p, dataset.n
    all_values = tuple(sorted(seen))
    domains = [intercept_values or all_values] + [all_values] * p
    coeff_set = CoefficientSet(tuple(domains))
    big_m = big_m_loss(dataset, coeff_set, gamma)

    variables: list[Variable] = []
    for j in range(p + 1):
        dom = coeff_set.values[j]
        variables.append(
            Variable(f"lam[{j}]", "integer", dom[0], dom[-1], "coefficient",
                     0.0, dom)
        )
    lam_idx = tuple(range(p + 1))
    psi_idx = []
    for i in range(n):
        w = w_pos if dataset.labels[i] == 1 else w_neg
        psi_idx.append(len(variables))
        variables.append(Variable(f"psi[{i}]", "binary", 0.0, 1.0, "loss",
                                  w / dataset.normalizer))

    rows: list[LinearConstraint] = []
    selector_links: list[SelectorLink] = []
    def_links: list[DefLink] = []
    cost_of_value = {v: c for vals, c in sets for v in vals}
    for j in range(p + 1):
        u_for_j: list[tuple[int, int]] = []  # (var index, value)
        for r, (vals, cost) in enumerate(sets):
            for v in vals:
                if v not in coeff_set.values[j]:
                    continue
                u = len(variables)
                obj = cost if j >= 1 else 0.0
                variables.append(
                    Variable(f"u[{j},{r},{v}]", "binary", 0.0, 1.0, "selector", obj)
                )
                u_for_j.append((u, v))
                selector_links.append(SelectorLink(u, j, v))
        rows.append(
            LinearConstraint(
                f"pick1[{j}]", tuple(u for u, _ in u_for_j),
                (1.0,) * len(u_for_j), "==", 1.0,
            )
        )
        rows.append(
            LinearConstraint(
                f"value[{j}]", (j, *(u for u, _ in u_for_j)),
                (1.0, *(-float(v) for _, v in u_for_j)), "==", 0.0,
            )
        )
        if j >= 1:
            phi = len(variables)
            variables.append(
                Variable(f"phi[{j}]", "continuous", 0.0, max(costs), "penalty", 0.0)
            )
            rows.append(
                LinearConstraint(
                    f"pen[{j}]", (phi, *(u for u, _ in u_for_j)),
                    (1.0, *(-cost_of_value[v] for _, v in u_for_j)), "==", 0.0,
                )
            )
            def_links.append(
                DefLink(phi, tuple((u, cost_of_value[v]) for u, v in u_for_j))
            )

    yx = dataset.labels[:, None] * dataset.features
    for i in range(n):
        rows.append(
            LinearConstraint(
                f"loss[{i}]", (psi_idx[i], *lam_idx),
                (float(big_m[i]), *(float(v) for v in yx[i])), ">=", gamma,
            )
        )

    return IPInstance(
        kind="tiered",
        variables=tuple(variables),
        constraints=tuple(rows),
        gamma=gamma,
        big_m=big_m,
        c0=tuple(min(c for c in costs if c > 0) if any(c > 0 for c in costs) else 0.0
                 for _ in range(p)),
        eps=0.0,
        weights=(w_pos, w_neg),
        n_train=n,
        normalizer=dataset.normalizer,
        loss=LossBlock(tuple(psi_idx), lam_idx, yx, dataset.labels.copy()),
        lambda_vars=lam_idx,
        feature_names=dataset.feature_names,
        selector_links=tuple(selector_links),
        def_links=tuple(def_links),
        meta={"tiers": sets, "coefficient_set": coeff_set},
    )


# ---------------------------------------------------------------------------
# M-of-N rule tables


def build_mofn(dataset: Dataset, c0: float, gamma: float | None = None,
               weights: ClassWeights | None = None) -> IPInstance:
    """Rule-table instance: 0/1 rule coefficients, nonpositive intercept.

    On 0/1 coefficients the l0 and l1 norms coincide, so the sparsity
    penalty sits directly on the coefficients. Decode with
    :func:`mofn_decode`: predict +1 when at least M of the N selected rules
    fire.
    """
    body = dataset.features[:, 1:]
    if not np.all(np.isin(body, (0.0, 1.0))):
        raise FormulationError("rule-table training needs 0/1 rule columns")
    if c0 <= 0:
        raise FormulationError("c0 must be positive")
    if gamma is None:
        gamma = 0.1  # binary features: any margin in (0, 1) is exact
    if weights is None:
        w_pos = w_neg = 1.0
    else:
        w_pos, w_neg = weights.w_pos, weights.w_neg

    p, n = dataset.p, dataset.n
    domains = [tuple(range(-p, 1))] + [(0, 1)] * p
    coeff_set = CoefficientSet(tuple(domains))
    big_m = big_m_loss(dataset, coeff_set, gamma)

    variables: list[Variable] = []
    variables.append(Variable("lam[0]", "integer", -p, 0, "coefficient", 0.0,
                              domains[0]))
    for j in range(1, p + 1):
        variables.append(Variable(f"lam[{j}]", "integer", 0, 1, "coefficient",
                                  c0, (0, 1)))
    lam_idx = tuple(range(p + 1))
    psi_idx = []
    for i in range(n):
        w = w_pos if dataset.labels[i] == 1 else w_neg
        psi_idx.append(len(variables))
        variables.append(Variable(f"psi[{i}]", "binary", 0.0, 1.0, "loss",
                                  w / dataset.normalizer))

    yx = dataset.labels[:, None] * dataset.features
    rows = [
        LinearConstraint(
            f"loss[{i}]", (psi_idx[i], *lam_idx),
            (float(big_m[i]), *(float(v) for v in yx[i])), ">=", gamma,
        )
        for i in range(n)
    ]

    return IPInstance(
        kind="mofn",
        variables=tuple(variables),
        constraints=tuple(rows),
        gamma=gamma,
        big_m=big_m,
        c0=(float(c0),) * p,
        eps=0.0,
        weights=(w_pos, w_neg),
        n_train=n,
        normalizer=dataset.normalizer,
        loss=LossBlock(tuple(psi_idx), lam_idx, yx, dataset.labels.copy()),
        lambda_vars=lam_idx,
        feature_names=dataset.feature_names,
        meta={"coefficient_set": coeff_set},
    )


def mofn_decode(model: ScoringSystem) -> tuple[int, int, tuple[str, ...]]:
    """(M, N, selected rule names): predict +1 iff at least M of N rules fire."""
    selected = tuple(
        name for name, c in zip(model.feature_names[1:], model.coefficients) if c != 0
    )
    m = 1 - model.intercept
    return m, len(selected), selected


# ---------------------------------------------------------------------------
# threshold-rule variant


def build_threshold_rules(
    dataset: Dataset,
    rule_groups: dict[str, tuple[int, ...]],
    c_f: float,
    c_t: float,
    eps: float,
    r_max: int,
    gamma: float | None = None,
    weights: ClassWeights | None = None,
    coeff_set: CoefficientSet | None = None,
) -> IPInstance:
    """Threshold-rule instance: per-feature use indicators, a count of
    additional rules per feature, and sign agreement within each group.

    ``rule_groups`` maps source feature name -> column indices (1-based)
    of the rules generated from it. The rule-count variable tau_j counts
    rules beyond the first (max(0, sum alpha - 1)) so a feature with no
    rules stays feasible; rules per feature are capped at ``r_max``.
    """
    body = dataset.features[:, 1:]
    if not np.all(np.isin(body, (0.0, 1.0))):
        raise FormulationError("threshold-rule training needs 0/1 rule columns")
    if r_max < 1:
        raise FormulationError("r_max must be >= 1")
    if gamma is None:
        gamma = 0.1
    if weights is None:
        w_pos = w_neg = 1.0
    else:
        w_pos, w_neg = weights.w_pos, weights.w_neg

    p, n = dataset.p, dataset.n
    covered = sorted(j for cols in rule_groups.values() for j in cols)
    if covered != list(range(1, p + 1)):
        raise FormulationError("rule groups must partition columns 1..P")
    if any(not cols for cols in rule_groups.values()):
        raise FormulationError("empty rule group")

    coeff_set = coeff_set or CoefficientSet.uniform(p)
    big_m = big_m_loss(dataset, coeff_set, gamma)

    variables: list[Variable] = []
    for j in range(p + 1):
        dom = coeff_set.values[j]
        variables.append(Variable(f"lam[{j}]", "integer", dom[0], dom[-1],
                                  "coefficient", 0.0, dom))
    lam_idx = tuple(range(p + 1))
    psi_idx = []
    for i in range(n):
        w = w_pos if dataset.labels[i] == 1 else w_neg
        psi_idx.append(len(variables))
        variables.append(Variable(f"psi[{i}]", "binary", 0.0, 1.0, "loss",
                                  w / dataset.normalizer))

    rows: list[LinearConstraint] = []
    yx = dataset.labels[:, None] * dataset.features
    for i in range(n):
        rows.append(
            LinearConstraint(
                f"loss[{i}]", (psi_idx[i], *lam_idx),
                (float(big_m[i]), *(float(v) for v in yx[i])), ">=", gamma,
            )
        )

    zero_links, abs_links, any_links, sign_links, maxzero_links = [], [], [], [], []
    alpha_of: dict[int, int] = {}
    beta_of: dict[int, int] = {}
    for j in range(1, p + 1):
        lamj = coeff_set.lam(j)
        a = len(variables)
        variables.append(Variable(f"alpha[{j}]", "binary", 0.0, 1.0, "l0", 0.0))
        b = len(variables)
        variables.append(Variable(f"beta[{j}]", "continuous", 0.0, float(lamj),
                                  "l1", eps))
        alpha_of[j], beta_of[j] = a, b
        rows.append(LinearConstraint(f"l0lo[{j}]", (j, a), (1.0, float(lamj)), ">=", 0.0))
        rows.append(LinearConstraint(f"l0hi[{j}]", (j, a), (-1.0, float(lamj)), ">=", 0.0))
        rows.append(LinearConstraint(f"l1lo[{j}]", (b, j), (1.0, 1.0), ">=", 0.0))
        rows.append(LinearConstraint(f"l1hi[{j}]", (b, j), (1.0, -1.0), ">=", 0.0))
        zero_links.append(ZeroLink(a, j))
        abs_links.append(AbsLink(b, j))

    for source in sorted(rule_groups):
        cols = tuple(rule_groups[source])
        t_j = len(cols)
        nu = len(variables)
        variables.append(Variable(f"nu[{source}]", "binary", 0.0, 1.0,
                                  "feature_use", c_f))
        tau = len(variables)
        variables.append(Variable(f"tau[{source}]", "integer", 0.0, float(t_j),
                                  "rule_count", c_t))
        delta = len(variables)
        variables.append(Variable(f"delta[{source}]", "binary", 0.0, 1.0,
                                  "sign", 0.0))
        alphas = tuple(alpha_of[j] for j in cols)
        # feature use: any selected rule forces nu = 1
        rows.append(
            LinearConstraint(
                f"use[{source}]", (nu, *alphas),
                (float(t_j), *(-1.0,) * t_j), ">=", 0.0,
            )
        )
        # additional-rule count and the per-feature cap
        rows.append(
            LinearConstraint(
                f"count[{source}]", (tau, *alphas),
                (1.0, *(-1.0,) * t_j), ">=", -1.0,
            )
        )
        rows.append(
            LinearConstraint(
                f"rmax[{source}]", alphas, (1.0,) * t_j, "<=", float(r_max)
            )
        )
        # sign agreement: -Lam (1 - delta) <= lam <= Lam delta
        for j in cols:
            lamj = float(coeff_set.lam(j))
            rows.append(
                LinearConstraint(f"sgnhi[{source},{j}]", (j, delta),
                                 (-1.0, lamj), ">=", 0.0)
            )
            rows.append(
                LinearConstraint(f"sgnlo[{source},{j}]", (j, delta),
                                 (1.0, -lamj), ">=", -lamj)
            )
        any_links.append(AnyLink(nu, alphas))
        sign_links.append(SignLink(delta, cols))
        maxzero_links.append(MaxZeroLink(tau, alphas))

    return IPInstance(
        kind="threshold",
        variables=tuple(variables),
        constraints=tuple(rows),
        gamma=gamma,
        big_m=big_m,
        c0=(float(c_f),) * p,
        eps=float(eps),
        weights=(w_pos, w_neg),
        n_train=n,
        normalizer=dataset.normalizer,
        loss=LossBlock(tuple(psi_idx), lam_idx, yx, dataset.labels.copy()),
        lambda_vars=lam_idx,
        feature_names=dataset.feature_names,
        zero_links=tuple(zero_links),
        abs_links=tuple(abs_links),
        any_links=tuple(any_links),
        sign_links=tuple(sign_links),
        maxzero_links=tuple(maxzero_links),
        meta={"rule_groups": dict(rule_groups), "c_f": c_f, "c_t": c_t,
              "r_max": r_max, "coefficient_set": coeff_set},
    )


# ---------------------------------------------------------------------------
# decoding and evaluation


def decode_assignment(instance: IPInstance, lam_values) -> np.ndarray:
    """Full variable assignment implied by fixed integer coefficients.

    Derived variables follow their definitions: loss indicators from the
    margins (1 iff margin < gamma), l0 / l1 / selector / use / count / sign
    variables from the coefficient values.
    """
    lam = np.asarray(lam_values, dtype=np.float64)
    if lam.shape != (len(instance.lambda_vars),):
        raise FormulationError("wrong number of coefficient values")
    x = np.zeros(instance.n_vars, dtype=np.float64)
    x[list(instance.lambda_vars)] = lam

    margins = instance.loss.coef @ lam
    psi = (margins < instance.gamma - FEAS_TOL).astype(np.float64)
    x[list(instance.loss.psi)] = psi

    lam_by_var = dict(zip(instance.lambda_vars, lam))
    for link in instance.zero_links:
        x[link.alpha] = 1.0 if lam_by_var[link.lam] != 0 else 0.0
    for link in instance.abs_links:
        x[link.beta] = abs(lam_by_var[link.lam])
    for link in instance.selector_links:
        x[link.u] = 1.0 if lam_by_var[link.lam] == link.value else 0.0
    for link in instance.any_links:
        x[link.nu] = 1.0 if any(x[a] > 0.5 for a in link.alphas) else 0.0
    for link in instance.sign_links:
        vals = [lam_by_var[j] for j in link.lams]
        x[link.delta] = 1.0 if any(v > 0 for v in vals) else 0.0
    for link in instance.maxzero_links:
        x[link.tau] = max(0.0, sum(x[a] for a in link.alphas) - 1.0)
    for link in instance.def_links:
        x[link.var] = sum(coef * x[idx] for idx, coef in link.terms)
    return x


def assignment_objective(instance: IPInstance, x: np.ndarray) -> float:
    return float(instance.objective_vector() @ x)


def check_feasible(instance: IPInstance, x: np.ndarray,
                   tol: float = 1e-6) -> tuple[bool, float]:
    """(feasible, worst violation) of all rows and bounds at assignment x."""
    worst = 0.0
    lo, hi = instance.var_bounds()
    worst = max(worst, float(np.max(lo - x, initial=0.0)),
                float(np.max(x - hi, initial=0.0)))
    for row in instance.constraints:
        val = sum(c * x[i] for i, c in zip(row.indices, row.coefs))
        if row.sense == "<=":
            worst = max(worst, val - row.rhs)
        elif row.sense == ">=":
            worst = max(worst, row.rhs - val)
        else:
            worst = max(worst, abs(val - row.rhs))
    return worst <= tol, worst


def evaluate_coefficients(instance: IPInstance, lam_values) -> tuple[float, bool]:
    """(objective, feasible) of the assignment decoded from coefficients."""
    x = decode_assignment(instance, lam_values)
    ok, _ = check_feasible(instance, x)
    return assignment_objective(instance, x), ok


def decode_model(instance: IPInstance, lam_values) -> ScoringSystem:
    lam = [int(round(v)) for v in np.asarray(lam_values, dtype=np.float64)]
    return ScoringSystem(
        intercept=lam[0],
        coefficients=tuple(lam[1:]),
        feature_names=instance.feature_names,
        metadata={"c0": list(instance.c0), "eps": instance.eps},
    )


# ---------------------------------------------------------------------------
# LP-format export (debug aid)


def to_lp_format(instance: IPInstance) -> str:
    """Serialize the instance in CPLEX LP text format for cross-checking."""

    def term(c: float, name: str) -> str:
        sign = "+" if c >= 0 else "-"
        return f"{sign} {abs(c):.17g} {name}"

    names = [v.name.replace("[", "_").replace("]", "").replace(",", "_")
             for v in instance.variables]
    lines = ["Minimize", " obj:"]
    obj_terms = [term(v.obj, names[i]) for i, v in enumerate(instance.variables)
                 if v.obj != 0.0]
    lines.append("  " + " ".join(obj_terms) if obj_terms else "  0 " + names[0])
    lines.append("Subject To")
    sense_map = {"<=": "<=", ">=": ">=", "==": "="}
    for row in instance.constraints:
        body = " ".join(term(c, names[i]) for i, c in zip(row.indices, row.coefs))
        lines.append(f" {row.name.replace('[', '_').replace(']', '').replace(',', '_')}:"
                     f" {body} {sense_map[row.sense]} {row.rhs:.17g}")
    lines.append("Bounds")
    for i, v in enumerate(instance.variables):
        lo = "-inf" if np.isneginf(v.lower) else f"{v.lower:.17g}"
        hi = "+inf" if np.isposinf(v.upper) else f"{v.upper:.17g}"
        lines.append(f" {lo} <= {names[i]} <= {hi}")
    general = [names[i] for i, v in enumerate(instance.variables)
               if v.kind == "integer"]
    binary = [names[i] for i, v in enumerate(instance.variables)
              if v.kind == "binary"]
    if general:
        lines.append("General")
        lines.append(" " + " ".join(general))
    if binary:
        lines.append("Binary")
        lines.append(" " + " ".join(binary))
    lines.append("End")
    return "\n".join(lines) + "\n"
