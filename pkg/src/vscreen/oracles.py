"""Naive reference implementations used to cross-check :mod:`vscreen.metrics`.

These deliberately share no code with the production metrics: plain loops,
exact rational arithmetic for EF, all-pairs counting for AUC and the
hyperbolic closed form of BEDROC.
"""

from fractions import Fraction
import math


def oracle_ef(ranked_labels, x_pct, n_total=None, n_actives=None):
    """EF@x% by scanning the first window of a best-first label list."""
    labels = [int(v) for v in ranked_labels]
    N = len(labels) if n_total is None else int(n_total)
    n = sum(labels) if n_actives is None else int(n_actives)
    if n == 0:
        raise ValueError("no actives")
    window = int(Fraction(N) * Fraction(str(x_pct)) / 100)
    if window < 1:
        window = 1
    hits = 0
    for i in range(min(window, len(labels))):
        if labels[i] == 1:
            hits += 1
    return float(Fraction(hits, window) / Fraction(n, N))


def oracle_auc(scores, labels):
    """Probability an active outscores an inactive, ties counting one half."""
    act = [s for s, y in zip(scores, labels) if y == 1]
    ina = [s for s, y in zip(scores, labels) if y == 0]
    if not act or not ina:
        raise ValueError("need both classes")
    total = 0
    for a in act:
        for b in ina:
            if a > b:
                total += 2
            elif a == b:
                total += 1
    return total / (2 * len(act) * len(ina))


def oracle_bedroc(active_ranks, n_total, alpha):
    """BEDROC via the sinh/cosh closed form, clamped to [0, 1]."""
    n = len(active_ranks)
    ra = n / n_total
    s = 0.0
    for r in active_ranks:
        s += math.exp(-alpha * r / n_total)
    rie = (s / n) / ((1.0 / n_total) * (1 - math.exp(-alpha)) / (math.exp(alpha / n_total) - 1))
    value = (rie * ra * math.sinh(alpha / 2) / (math.cosh(alpha / 2) - math.cosh(alpha / 2 - alpha * ra))
             + 1.0 / (1 - math.exp(alpha * (1 - ra))))
    return min(1.0, max(0.0, value))
