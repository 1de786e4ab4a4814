"""Independent loop-based reference implementations used as test oracles.

Written with the standard library only, without reusing package code, so a
shared bug cannot hide in both routes.
"""
import math


def minmax(values):
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.5] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def entropy_bits(values, bw):
    n_bins = math.ceil(round(1.0 / bw, 9))
    counts = [0] * n_bins
    for u in minmax(values):
        k = int(math.floor(u / bw))
        counts[min(k, n_bins - 1)] += 1
    n = len(values)
    h = 0.0
    for c in counts:
        if c:
            p = c / n
            h -= p * math.log2(p)
    return h


def residual_privacy(x_cols, xp_cols, bw):
    """Per attribute: 2**h(x) * (1 - clip(1 - 2**-(h(xp) - h(xp - x))))."""
    out = []
    for x, xp in zip(x_cols, xp_cols):
        hx = entropy_bits(x, bw)
        hxp = entropy_bits(xp, bw)
        hn = entropy_bits([b - a for a, b in zip(x, xp)], bw)
        loss = 1.0 - 2.0 ** (-(hxp - hn))
        loss = min(max(loss, 0.0), 1.0)
        out.append(2.0 ** hx * (1.0 - loss))
    return out


def gaussian(x, c, s):
    return math.exp(-((x - c) ** 2) / (2 * s * s))
