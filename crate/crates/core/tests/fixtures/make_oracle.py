"""Regenerate oracle.json: small fixed datasets with scipy Shapiro-Wilk and
scikit-posthocs Conover-Iman reference p-values.

    python3 make_oracle.py > oracle.json
"""
import json

import numpy as np
import scipy
import scikit_posthocs as sp
from scipy import stats


def dataset(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 7))
    sizes = [int(rng.integers(5, 31)) for _ in range(k)]
    shift = rng.normal(0.0, 0.15, size=k)
    scale = rng.uniform(0.7, 1.5, size=k)
    groups = [rng.normal(shift[g], scale[g], size=n) for g, n in enumerate(sizes)]
    tied = seed % 2 == 1
    if tied:
        groups = [np.round(g * 2.0) / 2.0 for g in groups]
    return groups, tied


def main():
    out = {"scipy": scipy.__version__, "scikit_posthocs": sp.__version__, "datasets": []}
    for seed in range(20):
        groups, tied = dataset(seed)
        shapiro = [float(stats.shapiro(g).pvalue) for g in groups]
        values = np.concatenate(groups)
        labels = np.concatenate([[i] * len(g) for i, g in enumerate(groups)])
        conover = sp.posthoc_conover([list(g) for g in groups], p_adjust=None)
        out["datasets"].append({
            "seed": seed,
            "tied": tied,
            "groups": [[float(v) for v in g] for g in groups],
            "shapiro_p": shapiro,
            "conover_p": conover.to_numpy().tolist(),
            "kruskal_p": float(stats.kruskal(*groups).pvalue),
            "levene_median_p": float(stats.levene(*groups, center="median").pvalue),
        })
    print(json.dumps(out, indent=1))


if __name__ == "__main__":
    main()
