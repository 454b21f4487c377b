"""Independent brute-force reference implementations used by the tests.

These deliberately mirror the metric definitions as literally as possible
(materializing the per-cutoff sets, looping over all pairs) and share no
code with the library implementations they check.
"""

from __future__ import annotations

import math


def brute_pdo(entries: list[tuple[int, int]], n: int) -> float:
    """entries: (label, rank) pairs for one predicate; label in {+1, -1}."""
    positives = [e for e in entries if e[0] == 1]
    total = 0.0
    for k in range(1, n):
        top = [e for e in entries if e[1] < k]
        top_pos = [e for e in top if e[0] == 1]
        fraction = len(top_pos) / len(top) if top else 1.0
        total += fraction
    assert positives, "PDO oracle needs at least one positive"
    return 1.0 - total / (n - 1)


def brute_pdd(entries: list[tuple[int, int]], n: int) -> float:
    positives = [e for e in entries if e[0] == 1]
    assert positives, "PDD oracle needs at least one positive"
    total = 0.0
    for k in range(1, n):
        top = [e for e in entries if e[1] < k]
        top_pos = [e for e in top if e[0] == 1]
        total += len(top_pos) / len(positives)
    return 1.0 - total / (n - 1)


def brute_auc(pos: list[float], neg: list[float]) -> float:
    """Pairwise Mann-Whitney with ties counted as 0.5."""
    assert pos and neg
    score = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                score += 1.0
            elif p == q:
                score += 0.5
    return score / (len(pos) * len(neg))


def naive_rank(scores: list[float]) -> list[int]:
    """Selection-sort ranking: repeatedly take the best remaining score,
    preferring the lowest index on ties."""
    remaining = list(range(len(scores)))
    ranks = [0] * len(scores)
    position = 0
    while remaining:
        best = remaining[0]
        for idx in remaining[1:]:
            if scores[idx] > scores[best]:
                best = idx
        ranks[best] = position
        remaining.remove(best)
        position += 1
    return ranks


def adjusted_rand_index(labels_a: list[int], labels_b: list[int]) -> float:
    """Contingency-table ARI; 1.0 iff the two partitions agree exactly."""
    assert len(labels_a) == len(labels_b)

    def comb2(x: int) -> float:
        return x * (x - 1) / 2.0

    table: dict[tuple[int, int], int] = {}
    for a, b in zip(labels_a, labels_b):
        table[(a, b)] = table.get((a, b), 0) + 1
    a_sizes: dict[int, int] = {}
    b_sizes: dict[int, int] = {}
    for (a, b), count in table.items():
        a_sizes[a] = a_sizes.get(a, 0) + count
        b_sizes[b] = b_sizes.get(b, 0) + count

    index = sum(comb2(c) for c in table.values())
    sum_a = sum(comb2(c) for c in a_sizes.values())
    sum_b = sum(comb2(c) for c in b_sizes.values())
    expected = sum_a * sum_b / comb2(len(labels_a))
    maximum = (sum_a + sum_b) / 2.0
    if math.isclose(maximum, expected):
        return 1.0
    return (index - expected) / (maximum - expected)
