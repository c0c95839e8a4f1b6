#!/usr/bin/env python3
"""Regenerates data/arena_fixture.csv, a synthetic arena-format vote log.

5000 well-formed rows over 12 models and 6 categories, plus a handful of
tie votes, stray-category rows, and malformed rows so the ingest error
accounting has something to count. Deterministic: seeded generator.
"""

import numpy as np

MODELS = [
    "aurora-70b", "borealis-8x22", "cascade-2.1", "drift-mini", "ember-3-large",
    "foxglove-40b", "glacier-v2", "harbor-13b", "ion-edge", "juniper-90b",
    "krill-7b", "lumen-pro",
]
CATEGORIES = ["coding", "math", "writing", "reasoning", "multilingual", "chat"]


def main() -> None:
    rng = np.random.default_rng(42)
    d_m, d_t, rank = len(MODELS), len(CATEGORIES), 3

    left = rng.normal(size=(d_t, rank))
    right = rng.normal(size=(d_m, rank))
    scores = left @ right.T
    scores -= scores.mean(axis=1, keepdims=True)
    scores *= 2.5 / np.abs(scores).max()

    # Skewed popularity so the top-K-by-frequency filter is non-trivial.
    popularity = rng.dirichlet([4.0] * d_m)
    cat_weights = rng.dirichlet([8.0] * d_t)

    lines = ["model_a,model_b,winner,category"]
    for _ in range(5000):
        t = rng.choice(d_t, p=cat_weights)
        a, b = rng.choice(d_m, size=2, replace=False, p=popularity)
        u = rng.uniform()
        if u < 0.04:
            winner = "tie"
        elif u < 0.06:
            winner = "tie (bothbad)"
        else:
            p = 1.0 / (1.0 + np.exp(-(scores[t, a] - scores[t, b])))
            winner = "model_a" if rng.uniform() < p else "model_b"
        category = CATEGORIES[t] if rng.uniform() > 0.015 else "stray"
        lines.append(f"{MODELS[a]},{MODELS[b]},{winner},{category}")

    # Malformed rows: missing winner, short row.
    lines.insert(1407, "aurora-70b,harbor-13b,,math")
    lines.insert(3101, "glacier-v2,ion-edge")

    with open("arena_fixture.csv", "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 1} data rows")


if __name__ == "__main__":
    main()
