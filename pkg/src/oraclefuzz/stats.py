"""Effect size and rank test used to compare fuzzing configurations."""

from __future__ import annotations

import math
from collections import Counter
from fractions import Fraction


def compute_a12(x, y) -> Fraction:
    """Vargha-Delaney A12: P(X > Y) + P(X = Y) / 2, as an exact fraction."""
    if not x or not y:
        raise ValueError("A12 needs two non-empty samples")
    wins = ties = 0
    for a in x:
        for b in y:
            if a > b:
                wins += 1
            elif a == b:
                ties += 1
    return Fraction(2 * wins + ties, 2 * len(x) * len(y))


def midranks(values) -> dict:
    """Map each distinct value to its average 1-based rank."""
    ranks = {}
    pos = 1
    for v, n in sorted(Counter(values).items()):
        ranks[v] = Fraction(2 * pos + n - 1, 2)
        pos += n
    return ranks


def compute_mwu(x, y) -> tuple:
    """Mann-Whitney U for ``x`` and a two-sided p-value.

    p uses the normal approximation with tie-corrected variance and a 0.5
    continuity correction; it is 1.0 when every observation is tied.
    """
    if not x or not y:
        raise ValueError("Mann-Whitney needs two non-empty samples")
    n1, n2 = len(x), len(y)
    pooled = list(x) + list(y)
    ranks = midranks(pooled)
    r1 = sum(ranks[v] for v in x)
    u = r1 - Fraction(n1 * (n1 + 1), 2)
    n = n1 + n2
    tie_term = sum(t**3 - t for t in Counter(pooled).values())
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    if var <= 0:
        return u, 1.0
    mean = n1 * n2 / 2.0
    diff = abs(float(u) - mean)
    z = max(diff - 0.5, 0.0) / math.sqrt(var)
    p = math.erfc(z / math.sqrt(2))
    return u, min(1.0, p)


def mean_var(sample) -> tuple:
    n = len(sample)
    m = sum(sample) / n
    var = sum((s - m) ** 2 for s in sample) / (n - 1) if n > 1 else 0.0
    return m, var
