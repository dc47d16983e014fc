"""Command-line trainer: train / cross-validate / regularization path /
data reduction / bound tables / model rendering."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import ClassWeights, DataError, Dataset, binarize, class_weights, load_csv, \
    save_csv
from .formulate import (
    FormulationError,
    Hierarchy,
    IfThen,
    MaxFPR,
    MaxModelSize,
    MinTPR,
    PerFeaturePenalty,
    PinZero,
    Sign,
    build_scorecard,
    missing_data_penalty,
)
from .milp.branch_bound import SolveResult, branch_and_bound
from .milp.simplex import relaxation, simplex_solve
from .reduce import epsilon_bounds, reduce_dataset
from .scoring import (
    CoefficientSet,
    ScoringSystem,
    load_model,
    norms,
    render_table,
    save_model,
    weighted_loss,
    zero_one_loss,
)
from . import theory

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_NO_INCUMBENT = 3
EXIT_INPUT_ERROR = 4


@dataclass
class RunConfig:
    dataset: str
    label_column: str = "y"
    binarization: dict | None = None
    lambda_max: int = 10
    intercept_max: int = 100
    c0: float | list = 0.01
    eps: float | None = None
    gamma: float | None = None
    weights: str | list = "none"
    constraints: list = field(default_factory=list)
    missing_penalty: bool = True
    time_limit: float = 600.0
    node_limit: int | None = None
    folds: int = 10
    seed: int = 0
    workers: int = 1
    reduce_epsilon: float | str | None = None
    output_dir: str | None = None

    @staticmethod
    def from_file(path) -> "RunConfig":
        payload = json.loads(Path(path).read_text())
        known = {f for f in RunConfig.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise DataError(f"unknown config keys: {sorted(unknown)}")
        return RunConfig(**payload)

    def c0_list(self, dataset: Dataset) -> list[float]:
        if isinstance(self.c0, (int, float)):
            return [float(self.c0)]
        out = []
        for v in self.c0:
            if v == "default":
                out.extend([0.01, 0.075, 0.05, 0.025, 0.001,
                            0.9 / (dataset.n * dataset.p)])
            else:
                out.append(float(v))
        return out


@dataclass
class FoldMetrics:
    fold: int
    train_error: float
    test_error: float
    tpr: float
    fpr: float
    model_size: int
    gap: float
    wall_time: float
    status: str


@dataclass
class Metrics:
    folds: list[FoldMetrics] = field(default_factory=list)

    def aggregate(self) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {}
        for name in ("train_error", "test_error", "tpr", "fpr", "model_size",
                     "gap", "wall_time"):
            vals = np.array([getattr(f, name) for f in self.folds], dtype=float)
            out[name] = {
                "mean": float(vals.mean()),
                "sd": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0,
                "min": float(vals.min()),
                "max": float(vals.max()),
            }
        return out

    def to_csv(self, path) -> None:
        fields = ["fold", "train_error", "test_error", "tpr", "fpr",
                  "model_size", "gap", "wall_time", "status"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(fields)
            for f in self.folds:
                writer.writerow([getattr(f, name) for name in fields])
            agg = self.aggregate()
            for stat in ("mean", "sd", "min", "max"):
                writer.writerow(
                    [stat] + [agg[name][stat] for name in fields[1:-1]] + [""]
                )


class InfeasibleError(RuntimeError):
    def __init__(self, binding: list[str]):
        super().__init__(
            "instance infeasible; constraint families that bind: "
            + (", ".join(binding) if binding else "core formulation")
        )
        self.binding = binding


class NoIncumbentError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# spec parsing


_SPEC_TYPES = {
    "max_fpr": lambda d: MaxFPR(float(d["gamma_fpr"])),
    "min_tpr": lambda d: MinTPR(float(d["min_tpr"])),
    "max_model_size": lambda d: MaxModelSize(int(d["theta"])),
    "sign": lambda d: Sign(d["feature"], int(d["sign"])),
    "if_then": lambda d: IfThen(tuple(d["antecedents"]), d["consequent"]),
    "hierarchy": lambda d: Hierarchy(d["leaf"], tuple(d["nodes"])),
    "per_feature_penalty": lambda d: PerFeaturePenalty(d["feature"], float(d["c0"])),
    "pin_zero": lambda d: PinZero(d["feature"]),
}


def parse_constraints(items: list) -> list:
    specs = []
    for item in items:
        kind = item.get("type")
        if kind not in _SPEC_TYPES:
            raise DataError(f"unknown constraint type {kind!r}")
        specs.append(_SPEC_TYPES[kind](item))
    return specs


# ---------------------------------------------------------------------------
# training pipeline


def _load_dataset(config: RunConfig) -> Dataset:
    dataset = load_csv(config.dataset, config.label_column)
    if config.binarization:
        dataset, _ = binarize(dataset, config.binarization)
    return dataset


def _weights_for(config: RunConfig, dataset: Dataset) -> ClassWeights | None:
    if config.weights in (None, "none"):
        return None
    if isinstance(config.weights, str):
        return class_weights(dataset, config.weights)
    w_pos, w_neg = (float(v) for v in config.weights)
    return ClassWeights(w_pos, w_neg)


def _build_instance(config: RunConfig, dataset: Dataset, c0: float):
    coeff_set = CoefficientSet.uniform(dataset.p, lam=config.lambda_max,
                                       intercept=config.intercept_max)
    specs = parse_constraints(config.constraints)
    c0_vec: list[float] = [c0] * dataset.p
    if config.missing_penalty and any(dataset.missing_counts[1:]):
        c0_vec = [
            missing_data_penalty(c0, m, dataset.n)
            for m in dataset.missing_counts[1:]
        ]
    weights = _weights_for(config, dataset)
    return build_scorecard(
        dataset,
        c0_vec,
        eps=config.eps,
        gamma=config.gamma,
        coeff_set=coeff_set,
        weights=weights,
        constraints=specs,
    ), weights


def _probe_infeasibility(config: RunConfig, dataset: Dataset, c0: float) -> list[str]:
    """Drop one constraint family at a time; report families whose removal
    makes the relaxation feasible."""
    families = sorted({item["type"] for item in config.constraints})
    binding = []
    for family in families:
        probe = replace(
            config,
            constraints=[c for c in config.constraints if c["type"] != family],
        )
        try:
            inst, _ = _build_instance(probe, dataset, c0)
        except FormulationError:
            continue
        if simplex_solve(relaxation(inst)).status == "optimal":
            binding.append(family)
    return binding


def _error_metrics(model: ScoringSystem, dataset: Dataset,
                   weights: ClassWeights | None) -> tuple[float, float, float]:
    """(error, tpr, fpr); error is weighted when weights are given."""
    if weights is None:
        _, err = zero_one_loss(model, dataset)
    else:
        err = weighted_loss(model, dataset, weights)
    margins = dataset.labels * (dataset.features @ model.vector.astype(float))
    wrong = margins <= 0
    n_pos, n_neg = dataset.n_pos, dataset.n_neg
    e_pos = int(np.count_nonzero(wrong & (dataset.labels == 1)))
    e_neg = int(np.count_nonzero(wrong & (dataset.labels == -1)))
    tpr = 1.0 - e_pos / n_pos if n_pos else np.nan
    fpr = e_neg / n_neg if n_neg else np.nan
    return float(err), float(tpr), float(fpr)


def train(config: RunConfig, dataset: Dataset | None = None,
          c0: float | None = None) -> tuple[ScoringSystem, SolveResult, FoldMetrics]:
    """Train one model on the full dataset per the config."""
    if dataset is None:
        dataset = _load_dataset(config)
    if c0 is None:
        c0 = config.c0_list(dataset)[0]

    if config.reduce_epsilon is not None:
        builder = lambda d: _build_instance(config, d, c0)[0]
        if config.reduce_epsilon == "zero-model":
            _, eps_red = epsilon_bounds(builder(dataset))
        else:
            eps_red = float(config.reduce_epsilon)
        dataset, _report = reduce_dataset(dataset, builder, eps_red)

    instance, weights = _build_instance(config, dataset, c0)
    result = branch_and_bound(
        instance,
        time_limit=config.time_limit,
        node_limit=config.node_limit,
        keep_trace=config.output_dir is not None,
    )
    if result.status == "infeasible":
        raise InfeasibleError(_probe_infeasibility(config, dataset, c0))
    if result.model is None:
        raise NoIncumbentError("budget exhausted before any feasible model was found")
    model = result.model
    model.metadata.update(
        c0=c0, eps=instance.eps,
        coefficient_set_bounds=[list(instance.meta["coefficient_set"].bounds(j))
                                for j in range(dataset.p + 1)],
    )
    err, tpr, fpr = _error_metrics(model, dataset, weights)
    metrics = FoldMetrics(
        fold=-1, train_error=err, test_error=np.nan, tpr=tpr, fpr=fpr,
        model_size=norms(model)[0], gap=result.gap, wall_time=result.wall_time,
        status=result.status,
    )
    return model, result, metrics


def stratified_folds(dataset: Dataset, k: int, seed: int) -> np.ndarray:
    """Fold id per example: per-class seeded shuffle, then round-robin."""
    if k < 2:
        raise DataError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    fold = np.full(dataset.n, -1, dtype=np.int64)
    for cls in (1, -1):
        idx = np.flatnonzero(dataset.labels == cls)
        rng.shuffle(idx)
        for pos, i in enumerate(idx):
            fold[i] = pos % k
    return fold


def _fold_job(args):
    config, dataset, c0, fold_ids, fold = args
    train_ds = dataset.subset(np.flatnonzero(fold_ids != fold))
    test_ds = dataset.subset(np.flatnonzero(fold_ids == fold))
    if train_ds.n_pos == 0 or train_ds.n_neg == 0:
        raise DataError(f"fold {fold}: training split has a single class")
    model, result, _ = train(config, dataset=train_ds, c0=c0)
    weights = _weights_for(config, train_ds)
    train_err, _, _ = _error_metrics(model, train_ds, weights)
    test_err, tpr, fpr = _error_metrics(model, test_ds, weights)
    return FoldMetrics(
        fold=fold, train_error=train_err, test_error=test_err, tpr=tpr,
        fpr=fpr, model_size=norms(model)[0], gap=result.gap,
        wall_time=result.wall_time, status=result.status,
    )


def cross_validate(config: RunConfig, dataset: Dataset | None = None,
                   c0: float | None = None, k: int | None = None) -> Metrics:
    """Stratified k-fold cross-validation; deterministic under the seed."""
    if dataset is None:
        dataset = _load_dataset(config)
    if c0 is None:
        c0 = config.c0_list(dataset)[0]
    k = k or config.folds
    fold_ids = stratified_folds(dataset, k, config.seed)
    jobs = [(config, dataset, c0, fold_ids, fold) for fold in range(k)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            folds = list(pool.map(_fold_job, jobs))
    else:
        folds = [_fold_job(job) for job in jobs]
    return Metrics(folds=sorted(folds, key=lambda f: f.fold))


def regularization_path(
    config: RunConfig, dataset: Dataset | None = None,
) -> list[tuple[float, ScoringSystem | None, FoldMetrics | None, Metrics | None]]:
    """One full-data train plus one CV per value on the c0 list."""
    if dataset is None:
        dataset = _load_dataset(config)
    rows = []
    for c0 in config.c0_list(dataset):
        try:
            model, _result, fm = train(config, dataset=dataset, c0=c0)
            cv = cross_validate(config, dataset=dataset, c0=c0)
        except (InfeasibleError, DataError, FormulationError) as exc:
            print(f"c0={c0:g}: {exc}", file=sys.stderr)
            rows.append((c0, None, None, None))
            continue
        rows.append((c0, model, fm, cv))
    return rows


# ---------------------------------------------------------------------------
# subcommands


def _outdir(config: RunConfig) -> Path | None:
    if config.output_dir is None:
        return None
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit_model(out: Path | None, model: ScoringSystem, result: SolveResult,
                note: str | None) -> None:
    text = render_table(model, threshold_note=note)
    print(text, end="")
    if out is None:
        return
    save_model(model, out / "model.json")
    (out / "model.txt").write_text(text)
    if result.trace:
        (out / "trace.tsv").write_text("\n".join(result.trace) + "\n")


def cmd_train(config: RunConfig, note: str | None) -> int:
    model, result, metrics = train(config)
    out = _outdir(config)
    _emit_model(out, model, result, note)
    print(f"status={result.status} objective={result.incumbent_objective:.6g} "
          f"gap={result.gap:.3g} nodes={result.nodes_explored} "
          f"train_error={metrics.train_error:.4f} size={metrics.model_size}")
    if out is not None:
        Metrics(folds=[metrics]).to_csv(out / "metrics.csv")
    if result.status == "feasible-budget-exhausted":
        return EXIT_OK
    return EXIT_OK


def cmd_cv(config: RunConfig) -> int:
    metrics = cross_validate(config)
    agg = metrics.aggregate()
    print(f"{config.folds}-fold CV: test_error "
          f"{agg['test_error']['mean']:.4f} +/- {agg['test_error']['sd']:.4f} "
          f"(size median-ish mean {agg['model_size']['mean']:.1f})")
    out = _outdir(config)
    if out is not None:
        metrics.to_csv(out / "metrics.csv")
    return EXIT_OK


def cmd_path(config: RunConfig) -> int:
    dataset = _load_dataset(config)
    rows = regularization_path(config, dataset)
    out = _outdir(config)
    lines = [("c0", "model_size", "train_error", "cv_test_error", "cv_test_sd")]
    for c0, model, fm, cv in rows:
        if model is None:
            lines.append((f"{c0:.8g}", "", "", "", ""))
            continue
        agg = cv.aggregate()
        lines.append((
            f"{c0:.8g}", str(norms(model)[0]), f"{fm.train_error:.6f}",
            f"{agg['test_error']['mean']:.6f}", f"{agg['test_error']['sd']:.6f}",
        ))
    for line in lines:
        print("\t".join(line))
    if out is not None:
        with open(out / "path.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(lines)
    return EXIT_OK


def cmd_reduce(config: RunConfig, epsilon: str) -> int:
    dataset = _load_dataset(config)
    c0 = config.c0_list(dataset)[0]
    builder = lambda d: _build_instance(config, d, c0)[0]
    if epsilon == "zero-model":
        _, eps = epsilon_bounds(builder(dataset))
    else:
        eps = float(epsilon)
    reduced, report = reduce_dataset(dataset, builder, eps)
    print(f"removed {report.removed_fraction:.1%} of {dataset.n} examples "
          f"(epsilon={report.epsilon:.6g}, surrogate={report.surrogate_objective:.6g})")
    out = _outdir(config)
    if out is not None:
        save_csv(reduced, out / "reduced.csv")
        (out / "reduction.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return EXIT_OK


def cmd_bounds(args) -> int:
    rows = [("lambda", "occam_full", "occam_sparse", "coprime_density", "farey_count")]
    for lam in range(1, args.lam_max + 1):
        full = (2 * lam + 1) ** args.p
        occam_full = theory.occam_bound(full, args.delta, args.n)
        sparse = theory.sparse_hypothesis_count(args.p, lam, args.c0)
        occ_sparse = theory.occam_bound(sparse, args.delta, args.n)
        density = (theory.coprime_density(args.p, lam)
                   if args.p * (2 * lam + 1) ** args.p <= 2_000_000 else np.nan)
        farey = (theory.farey_count(args.p, lam)
                 if sum(q ** args.p for q in range(1, lam + 1)) <= 2_000_000
                 else -1)
        rows.append((str(lam), f"{occam_full:.6f}", f"{occ_sparse:.6f}",
                     f"{density:.6f}", str(farey)))
    for row in rows:
        print("\t".join(row))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    return EXIT_OK


def cmd_render(args) -> int:
    model = load_model(args.model)
    print(render_table(model, threshold_note=args.note, markdown=args.markdown),
          end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_config_args(sub):
    sub.add_argument("--config", "-c", help="JSON config file")
    sub.add_argument("--dataset", help="CSV dataset path")
    sub.add_argument("--label-column", default=None)
    sub.add_argument("--c0", type=str, default=None,
                     help="comma-separated list or 'default'")
    sub.add_argument("--eps", type=float, default=None)
    sub.add_argument("--gamma", type=float, default=None)
    sub.add_argument("--lambda-max", type=int, default=None)
    sub.add_argument("--intercept-max", type=int, default=None)
    sub.add_argument("--max-size", type=int, default=None)
    sub.add_argument("--max-fpr", type=float, default=None)
    sub.add_argument("--weights", default=None,
                     help="none | balanced | max_sensitivity")
    sub.add_argument("--time-limit", type=float, default=None)
    sub.add_argument("--node-limit", type=int, default=None)
    sub.add_argument("--folds", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--workers", type=int, default=None)
    sub.add_argument("--output", "-o", default=None, help="output directory")


def _config_from_args(args) -> RunConfig:
    if args.config:
        config = RunConfig.from_file(args.config)
    else:
        if not args.dataset:
            raise DataError("either --config or --dataset is required")
        config = RunConfig(dataset=args.dataset)
    overrides = {
        "dataset": args.dataset,
        "label_column": args.label_column,
        "eps": args.eps,
        "gamma": args.gamma,
        "lambda_max": args.lambda_max,
        "intercept_max": args.intercept_max,
        "weights": args.weights,
        "time_limit": args.time_limit,
        "node_limit": args.node_limit,
        "folds": args.folds,
        "seed": args.seed,
        "workers": args.workers,
        "output_dir": args.output,
    }
    for key, val in overrides.items():
        if val is not None:
            config = replace(config, **{key: val})
    if args.c0 is not None:
        parts = [p.strip() for p in args.c0.split(",")]
        vals: list = [p if p == "default" else float(p) for p in parts]
        config = replace(config, c0=vals if len(vals) > 1 or vals == ["default"]
                         else float(vals[0]))
    extra = list(config.constraints)
    if args.max_size is not None:
        extra.append({"type": "max_model_size", "theta": args.max_size})
    if args.max_fpr is not None:
        extra.append({"type": "max_fpr", "gamma_fpr": args.max_fpr})
    config = replace(config, constraints=extra)
    return config


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="scorecard",
        description="Train integer scoring systems by exact 0-1 loss minimization",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    for name in ("train", "cv", "path"):
        sub = subs.add_parser(name)
        _add_config_args(sub)
        if name == "train":
            sub.add_argument("--note", default=None,
                             help="headline label for the rendered table")

    sub = subs.add_parser("reduce")
    _add_config_args(sub)
    sub.add_argument("--epsilon", default="zero-model",
                     help="level-set width, or 'zero-model'")

    sub = subs.add_parser("bounds")
    sub.add_argument("--p", type=int, required=True)
    sub.add_argument("--lam-max", type=int, default=10)
    sub.add_argument("--n", type=int, default=1000)
    sub.add_argument("--delta", type=float, default=0.01)
    sub.add_argument("--c0", type=float, default=0.05)
    sub.add_argument("--csv", default=None)

    sub = subs.add_parser("render")
    sub.add_argument("model", help="model.json path")
    sub.add_argument("--note", default=None)
    sub.add_argument("--markdown", action="store_true")

    args = parser.parse_args(argv)
    try:
        if args.command == "bounds":
            return cmd_bounds(args)
        if args.command == "render":
            return cmd_render(args)
        config = _config_from_args(args)
        started = time.monotonic()
        if args.command == "train":
            code = cmd_train(config, args.note)
        elif args.command == "cv":
            code = cmd_cv(config)
        elif args.command == "path":
            code = cmd_path(config)
        else:
            code = cmd_reduce(config, args.epsilon)
        print(f"done in {time.monotonic() - started:.1f}s", file=sys.stderr)
        return code
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NoIncumbentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_INCUMBENT
    except (DataError, FormulationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
