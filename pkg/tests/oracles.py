"""Independent reference computations used by the tests.

Nothing here calls the package's algorithms: partitions are generated by
brute force, closed forms are written out, and roots come from scipy.
"""

from fractions import Fraction
from math import comb, prod

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq


def all_set_partitions(n):
    """Every set partition of {1..n}, as lists of sorted blocks (Bell(n) of them)."""
    if n == 0:
        yield []
        return
    for rest in all_set_partitions(n - 1):
        for i in range(len(rest)):
            yield rest[:i] + [rest[i] + [n]] + rest[i + 1:]
        yield rest + [[n]]


def crosses(blocks):
    """True if some a < b < c < d has a, c in one block and b, d in another."""
    label = {x: i for i, block in enumerate(blocks) for x in block}
    xs = sorted(label)
    for a in xs:
        for b in xs:
            if b <= a:
                continue
            for c in xs:
                if c <= b or label[c] != label[a] or label[b] == label[a]:
                    continue
                for d in xs:
                    if d > c and label[d] == label[b]:
                        return True
    return False


def noncrossing_bruteforce(n):
    return [p for p in all_set_partitions(n) if not crosses(p)]


def catalan(n):
    return comb(2 * n, n) // (n + 1)


def nc_sum(n, weight):
    """Sum over NC(n) of the product of ``weight(block)`` over blocks."""
    return sum(prod(weight(b) for b in p) for p in noncrossing_bruteforce(n))


def moments_bruteforce(r, n):
    """``m_n = sum_{NC(n)} prod r_|B|`` with ``r`` a 1-indexed callable or list."""
    get = r if callable(r) else (lambda k: r[k - 1])
    return nc_sum(n, lambda b: get(len(b)))


def step_power_integral(breakpoints, values, k):
    """``int f^k`` for a step function given as plain lists (signed)."""
    return sum((Fraction(b) - Fraction(a)) * Fraction(v) ** k
               for a, b, v in zip(breakpoints, breakpoints[1:], values))


def step_abs_power_integral(breakpoints, values, k):
    return sum((Fraction(b) - Fraction(a)) * abs(Fraction(v)) ** k
               for a, b, v in zip(breakpoints, breakpoints[1:], values))


# semicircle -------------------------------------------------------------------


def semicircle_cdf(x, t=1.0):
    r = 2.0 * np.sqrt(t)
    if x <= -r:
        return 0.0
    if x >= r:
        return 1.0
    u = x / r
    return 0.5 + (u * np.sqrt(1 - u * u) + np.arcsin(u)) / np.pi


def semicircle_quantiles(N, t=1.0):
    """Midpoint quantiles ``F^{-1}((2i - 1) / 2N)`` by root finding on the closed-form CDF."""
    r = 2.0 * np.sqrt(t)
    return np.array([brentq(lambda x: semicircle_cdf(x, t) - (2 * i - 1) / (2 * N), -r, r, xtol=1e-14)
                     for i in range(1, N + 1)])


def semicircle_G(z, t=1.0):
    """The root of ``t G^2 - z G + 1 = 0`` that behaves like ``1/z`` at infinity."""
    z = complex(z)
    s = np.sqrt(z * z - 4 * t + 0j)
    roots = [(z - s) / (2 * t), (z + s) / (2 * t)]
    return min(roots, key=abs)


def semicircle_density(x, t=1.0):
    return np.sqrt(max(4 * t - x * x, 0.0)) / (2 * np.pi * t)


def marchenko_pastur_density(x):
    """Free Poisson with rate 1 on (0, 4)."""
    if not 0 < x < 4:
        return 0.0
    return np.sqrt(x * (4 - x)) / (2 * np.pi * x)


def integrate(f, a, b, points=None):
    return quad(f, a, b, points=points, limit=400)[0]
