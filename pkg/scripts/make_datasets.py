#!/usr/bin/env python3
"""Regenerate the bundled benchmark datasets.

Both files are synthetic stand-ins shaped like the UCI originals they are
named after (same N, P, value ranges and class balance); the real files are
not redistributable here. Generation is deterministic.

  bankruptcy.csv    250 x 6, qualitative ratings coded -1/0/+1; the label
                    is a noise-free 3-feature majority rule, so a 3-term
                    integer scoring system separates it exactly.
  breastcancer.csv  683 x 9, cytology grades 1..10; labels carry ~2% noise
                    against a 2-feature latent rule, so the best sparse
                    models sit near 3% error.
"""

from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "src" / "scorecard" / "datasets"

BANKRUPTCY_NAMES = [
    "industrial_risk", "management_risk", "operating_risk",
    "financial_flexibility", "credibility", "competitiveness",
]
BREASTCANCER_NAMES = [
    "clump_thickness", "cell_size_uniformity", "cell_shape_uniformity",
    "marginal_adhesion", "epithelial_cell_size", "bare_nuclei",
    "bland_chromatin", "normal_nucleoli", "mitoses",
]


def make_bankruptcy(seed: int = 11, n: int = 250) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    rows = []
    labels = []
    while len(rows) < n:
        core = rng.choice([-1, 0, 1], size=3, p=[0.34, 0.22, 0.44])
        total = core.sum()
        if total == 0:
            continue  # keep the rule margin at least 1
        y = 1 if total > 0 else -1
        noise = np.empty(3, dtype=np.int64)
        for k in range(3):
            if rng.random() < 0.55:
                noise[k] = core[k]
            else:
                noise[k] = rng.choice([-1, 0, 1])
        # column order: three noisy correlates, then the three rule features
        rows.append(np.concatenate([noise, core]))
        labels.append(y)
    return np.array(rows, dtype=np.int64), np.array(labels, dtype=np.int64)


def make_breastcancer(seed: int = 5, n: int = 683) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    n_pos = int(round(0.35 * n))
    rows = []
    labels = []
    informative = (1, 5)  # cell_size_uniformity, bare_nuclei

    for i in range(n):
        malignant = i < n_pos
        feats = np.empty(9, dtype=np.int64)
        for j in range(9):
            if j in informative:
                rate = 6.0 if malignant else 0.9
            else:
                # class-independent: extra features add variance, not signal
                rate = 1.6
            feats[j] = np.clip(rng.poisson(rate) + 1, 1, 10)
        rows.append(feats)
        labels.append(1 if malignant else -1)

    rows = np.array(rows, dtype=np.int64)
    labels = np.array(labels, dtype=np.int64)
    # fixed shuffle so folds are not class-sorted
    order = rng.permutation(n)
    return rows[order], labels[order]


def write_csv(path: Path, names, x: np.ndarray, y: np.ndarray) -> None:
    lines = [",".join(["y"] + list(names))]
    for row, label in zip(x, y):
        lines.append(",".join([str(int(label))] + [str(int(v)) for v in row]))
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path} ({x.shape[0]} rows, {x.shape[1]} features)")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    x, y = make_bankruptcy()
    print("bankruptcy positives:", (y == 1).mean())
    write_csv(OUT / "bankruptcy.csv", BANKRUPTCY_NAMES, x, y)
    x, y = make_breastcancer()
    print("breastcancer positives:", (y == 1).mean())
    write_csv(OUT / "breastcancer.csv", BREASTCANCER_NAMES, x, y)


if __name__ == "__main__":
    main()
