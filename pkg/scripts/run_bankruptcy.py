#!/usr/bin/env python3
"""Bankruptcy benchmark: full-data training plus 10-fold cross-validation.

Mirrors acceptance criterion 6: a 600-second budget per solve, coefficient
range +-10 with intercept +-100, penalty weight 0.01. Writes the model,
rendered table and metrics under out/bankruptcy/.
"""

import sys
import time
from importlib.resources import files

from scorecard.cli import RunConfig, cross_validate, train
from scorecard.scoring import norms, render_table


def main() -> int:
    t0 = time.time()
    config = RunConfig(
        dataset=str(files("scorecard.datasets") / "bankruptcy.csv"),
        label_column="y",
        c0=0.01,
        lambda_max=10,
        intercept_max=100,
        time_limit=600.0,
        folds=10,
        seed=0,
        output_dir="out/bankruptcy",
    )
    model, result, metrics = train(config)
    print(render_table(model, threshold_note="FIRM WILL GO BANKRUPT"))
    print(f"final model: status={result.status} gap={result.gap:.3g} "
          f"train_error={metrics.train_error:.4f} size={norms(model)[0]}")

    cv = cross_validate(config)
    agg = cv.aggregate()
    cv.to_csv("out/bankruptcy/metrics.csv")
    print(f"10-CV test error: {agg['test_error']['mean']:.4f} "
          f"+/- {agg['test_error']['sd']:.4f}")
    print(f"total wall time: {time.time() - t0:.0f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
