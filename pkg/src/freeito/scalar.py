"""Scalar stochastic integrals ``int f dX`` for step functions ``f``.

The law of ``int f dX`` is determined by its free cumulants
``r_k * int f^k``, so everything about it (moments, mu-norms, diagonal
measures) reduces to exact cumulant arithmetic.  The moment-flow ODE gives
an independent numerical route to the same moments.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .cumulants import (
    CumulantSequence,
    FreeLevyData,
    as_rational,
    moments_from_cumulants,
)
from .errors import DomainError, ValidationError
from .partitions import iter_noncrossing_rgs

MIN_FLOW_STEPS = 100


@dataclass(frozen=True)
class StepFunction:
    """Piecewise constant function, ``values[i]`` on ``[breakpoints[i], breakpoints[i+1])``.

    Zero outside ``[breakpoints[0], breakpoints[-1])``.  Breakpoints and
    values are stored as Fractions; floats are converted exactly.

    Examples
    --------
    >>> f = StepFunction(["0", "1", "2"], ["1", "3"])
    >>> f.integral(), lp_power(f, 3)
    (Fraction(4, 1), Fraction(28, 1))
    """

    breakpoints: tuple[Fraction, ...]
    values: tuple[Fraction, ...]

    def __init__(self, breakpoints: Iterable, values: Iterable):
        bps = tuple(as_rational(b, f"breakpoints[{i}]") for i, b in enumerate(breakpoints))
        vals = tuple(as_rational(v, f"values[{i}]") for i, v in enumerate(values))
        if len(bps) < 2:
            raise ValidationError("a step function needs at least two breakpoints")
        if len(vals) != len(bps) - 1:
            raise ValidationError(f"{len(bps)} breakpoints need {len(bps) - 1} values, got {len(vals)}")
        if any(b <= a for a, b in zip(bps, bps[1:])):
            raise ValidationError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)

    @classmethod
    def indicator(cls, a=0, b=1, height=1) -> "StepFunction":
        return cls([a, b], [height])

    @classmethod
    def zero(cls) -> "StepFunction":
        return cls([0, 1], [0])

    @property
    def lengths(self) -> tuple[Fraction, ...]:
        return tuple(b - a for a, b in zip(self.breakpoints, self.breakpoints[1:]))

    @property
    def support(self) -> tuple[Fraction, Fraction]:
        return self.breakpoints[0], self.breakpoints[-1]

    def pieces(self):
        """Yield ``(start, end, value)`` for each constant piece."""
        for i, v in enumerate(self.values):
            yield self.breakpoints[i], self.breakpoints[i + 1], v

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        edges = np.array([float(b) for b in self.breakpoints])
        vals = np.array([0.0] + [float(v) for v in self.values] + [0.0])
        return vals[np.searchsorted(edges, x, side="right")]

    def value_at(self, x) -> Fraction:
        """Exact value at a rational point."""
        x = as_rational(x, "x")
        for a, b, v in self.pieces():
            if a <= x < b:
                return v
        return Fraction(0)

    def refine(self, points: Iterable) -> "StepFunction":
        """Same function on a finer breakpoint grid (points outside extend the grid)."""
        grid = sorted(set(self.breakpoints) | {as_rational(p, "point") for p in points})
        return StepFunction(grid, [self.value_at(a) for a in grid[:-1]])

    def _binary(self, other: "StepFunction", op) -> "StepFunction":
        grid = sorted(set(self.breakpoints) | set(other.breakpoints))
        return StepFunction(grid, [op(self.value_at(a), other.value_at(a)) for a in grid[:-1]])

    def __add__(self, other: "StepFunction") -> "StepFunction":
        return self._binary(other, lambda a, b: a + b)

    def __sub__(self, other: "StepFunction") -> "StepFunction":
        return self._binary(other, lambda a, b: a - b)

    def __mul__(self, c) -> "StepFunction":
        c = as_rational(c, "scalar")
        return StepFunction(self.breakpoints, [c * v for v in self.values])

    __rmul__ = __mul__

    def __neg__(self) -> "StepFunction":
        return self * -1

    def __abs__(self) -> "StepFunction":
        return StepFunction(self.breakpoints, [abs(v) for v in self.values])

    def abs_root(self, k: int) -> "StepFunction":
        """``|f|^(1/k)`` valuewise.  Exact for ``k = 1``, otherwise rounded to double."""
        if not isinstance(k, int) or k < 1:
            raise DomainError(f"root index must be a positive integer, got {k!r}")
        if k == 1:
            return abs(self)
        return StepFunction(self.breakpoints, [float(abs(v)) ** (1.0 / k) for v in self.values])

    def is_nonnegative(self) -> bool:
        return all(v >= 0 for v in self.values)

    def dominates(self, other: "StepFunction") -> bool:
        """``other <= self`` everywhere."""
        grid = set(self.breakpoints) | set(other.breakpoints)
        return all(other.value_at(a) <= self.value_at(a) for a in grid)

    def integral(self, power: int = 1) -> Fraction:
        """``int f(s)^power ds`` (signed)."""
        return sum((v**power * h for v, h in zip(self.values, self.lengths)), Fraction(0))

    def to_json(self) -> dict:
        return {"breakpoints": [str(b) for b in self.breakpoints], "values": [str(v) for v in self.values]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "StepFunction":
        if not isinstance(obj, Mapping):
            raise ValidationError("step file: expected a JSON object")
        for key in ("breakpoints", "values"):
            if not isinstance(obj.get(key), list):
                raise ValidationError(f"step file: field {key!r} must be a list")
        return cls(obj["breakpoints"], obj["values"])


def lp_power(f: StepFunction, p: int) -> Fraction:
    """``||f||_p^p = sum |v_i|^p (t_i - t_{i-1})``, exact."""
    if not isinstance(p, int) or p < 1:
        raise DomainError(f"p must be a positive integer, got {p!r}")
    return sum((abs(v) ** p * h for v, h in zip(f.values, f.lengths)), Fraction(0))


def _integral_levy(f: StepFunction, levy: FreeLevyData) -> FreeLevyData:
    jumps = tuple((a * v, c * h) for a, c in levy.jumps for v, h in zip(f.values, f.lengths) if v != 0)
    return FreeLevyData(levy.drift * f.integral(1), levy.variance * f.integral(2), jumps)


def integral_cumulants(f: StepFunction, r: CumulantSequence, order: int | None = None) -> CumulantSequence:
    """Free cumulants of ``int f dX``: ``r_k(nu) = r_k * int f^k``.

    For ``f >= 0`` this is ``r_k ||f||_k^k``.  The result inherits the
    truncation kind of ``r``; a closed form for ``r`` carries over.
    """
    order = r.order if order is None else order
    levy = _integral_levy(f, r.levy) if r.levy is not None else None
    return CumulantSequence([r[k] * f.integral(k) for k in range(1, order + 1)], r.finitely_supported, levy)


def integral_moments(f: StepFunction, r: CumulantSequence, n: int):
    """Exact moments ``phi[(int f dX)^k]``, ``k = 1..n``."""
    return moments_from_cumulants(integral_cumulants(f, r, max(n, 1)), n)


def diagonal_cumulants(r: CumulantSequence, k: int, t, n: int) -> CumulantSequence:
    """Cumulants of the diagonal measure ``Delta_k(t)``: ``r_i = t * r_{ik}``, ``i = 1..n``."""
    if not isinstance(k, int) or k < 1:
        raise DomainError(f"k must be a positive integer, got {k!r}")
    t = as_rational(t, "t")
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t}")
    values = [t * r[i * k] for i in range(1, n + 1)]
    levy = None
    if r.levy is not None:
        base = r.levy
        if k == 1:
            levy = base.scaled(t)
        else:
            drift = base.variance if k == 2 else Fraction(0)
            levy = FreeLevyData(drift, Fraction(0), tuple((a**k, c) for a, c in base.jumps)).scaled(t)
    return CumulantSequence(values, r.finitely_supported, levy)


def diagonal_mean(r: CumulantSequence, k: int, t) -> Fraction:
    """``phi[Delta_k(t)] = t * r_k``."""
    return as_rational(t, "t") * r[k]


def _check_even(n):
    if not isinstance(n, int) or n < 2 or n % 2:
        raise DomainError(f"n must be an even integer >= 2, got {n!r}")


def mu_norm_power(f: StepFunction, r: CumulantSequence, n: int) -> Fraction:
    """``||f||_{n,mu}^n`` exactly.

    The noncrossing sum ``sum_pi prod_B r_|B| ||f||_|B|^|B|`` is the n-th
    moment of the law whose k-th cumulant is ``r_k ||f||_k^k``.
    """
    _check_even(n)
    r.require_nonnegative(n)
    weights = CumulantSequence([r[k] * lp_power(f, k) for k in range(1, n + 1)])
    return moments_from_cumulants(weights, n)[n]


def mu_norm(f: StepFunction, r: CumulantSequence, n: int) -> float:
    """``||f||_{n,mu}``, the real n-th root of :func:`mu_norm_power`."""
    return float(mu_norm_power(f, r, n)) ** (1.0 / n)


def mu_norm_tail(f: StepFunction, r: CumulantSequence, n_max: int) -> list[tuple[int, float]]:
    """``[(n, ||f||_{n,mu}) for n = 2, 4, ..., n_max]``; a diagnostic for the limit."""
    _check_even(n_max)
    return [(n, mu_norm(f, r, n)) for n in range(2, n_max + 1, 2)]


def extrapolate_tail(tail: Sequence[tuple[int, float]]) -> float:
    """Richardson estimate of the limit assuming ``a_n = L + c/n``.

    Uses the last two entries.  This is an estimate, not a bound.
    """
    if len(tail) < 2:
        raise ValidationError("need at least two tail entries")
    (m, am), (n, an) = tail[-2], tail[-1]
    return (n * an - m * am) / (n - m)


def isometry_norm_squared(f: StepFunction, r: CumulantSequence) -> Fraction:
    """``phi[(int f dX)^2] = r_2 int f^2 + r_1^2 (int f)^2``."""
    return r[2] * f.integral(2) + r[1] ** 2 * f.integral(1) ** 2


def product_integral(fs: Sequence[StepFunction]) -> Fraction:
    """``int f_1(s) ... f_m(s) ds`` for step functions."""
    grid = sorted(set().union(*(f.breakpoints for f in fs)))
    total = Fraction(0)
    for a, b in zip(grid, grid[1:]):
        value = Fraction(1)
        for f in fs:
            value *= f.value_at(a)
        total += value * (b - a)
    return total


def mixed_moment(fs: Sequence[StepFunction], r: CumulantSequence) -> Fraction:
    """``phi[N_1 ... N_n]`` for ``N_i = int f_i dX``, exactly.

    Sums ``prod_B r_|B| int prod_{i in B} f_i`` over noncrossing partitions.
    """
    n = len(fs)
    if n == 0:
        return Fraction(1)
    cache: dict[tuple[int, ...], Fraction] = {}
    total = Fraction(0)
    for labels in iter_noncrossing_rgs(n):
        term = Fraction(1)
        for b in range(max(labels) + 1):
            block = tuple(i for i, lab in enumerate(labels) if lab == b)
            if block not in cache:
                cache[block] = r[len(block)] * product_integral([fs[i] for i in block])
            term *= cache[block]
            if not term:
                break
        total += term
    return total


def _flow_rhs(y: np.ndarray, fval: float, rcoef: np.ndarray) -> np.ndarray:
    # d/dt y_n = [x^n] D(x) * x f R(f x Y(x)),  D = (x Y)',  R(w) = sum r_k w^(k-1)
    n = len(y) - 1
    w = np.zeros(n + 1)
    w[1:] = fval * y[:-1]
    rw = np.zeros(n + 1)
    rw[0] = rcoef[-1]
    for c in rcoef[-2::-1]:
        rw = np.convolve(rw, w)[: n + 1]
        rw[0] += c
    d = y * np.arange(1, n + 2)
    out = np.zeros(n + 1)
    out[1:] = fval * np.convolve(d, rw)[:n]
    return out


def moment_flow_trajectory(f: StepFunction, r: CumulantSequence, n_max: int, t: float, steps: int):
    """Integrate the moment ODE on ``[0, t]`` with RK4.

    Returns ``(times, Y)`` where ``Y[j, n-1] = phi[M(times[j])^n]``.  The
    grid contains every breakpoint of ``f`` inside ``(0, t)``, so ``f`` is
    constant on each step; pieces where ``f = 0`` are skipped exactly.
    """
    if not isinstance(n_max, int) or n_max < 1:
        raise DomainError(f"n_max must be a positive integer, got {n_max!r}")
    if t < 0:
        raise DomainError(f"t must be non-negative, got {t}")
    if steps < MIN_FLOW_STEPS:
        warnings.warn(f"{steps} steps is below {MIN_FLOW_STEPS}; moment-flow accuracy may suffer", stacklevel=2)
    steps = max(int(steps), 1)
    rcoef = np.array([float(v) for v in r.take(n_max)])
    knots = sorted({0.0, float(t)} | {float(b) for b in f.breakpoints if 0 < b < t})
    total = knots[-1] - knots[0]
    y = np.zeros(n_max + 1)
    y[0] = 1.0
    times, states = [0.0], [y[1:].copy()]
    for a, b in zip(knots, knots[1:]):
        fval = float(f((a + b) / 2))
        count = max(1, round(steps * (b - a) / total))
        h = (b - a) / count
        for j in range(count):
            if fval != 0.0:
                k1 = _flow_rhs(y, fval, rcoef)
                k2 = _flow_rhs(y + 0.5 * h * k1, fval, rcoef)
                k3 = _flow_rhs(y + 0.5 * h * k2, fval, rcoef)
                k4 = _flow_rhs(y + h * k3, fval, rcoef)
                y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            times.append(a + (j + 1) * h)
            states.append(y[1:].copy())
    return np.array(times), np.array(states)


def moment_flow(f: StepFunction, r: CumulantSequence, n_max: int, t: float, steps: int) -> list[float]:
    """``[phi[M(t)^n] for n = 1..n_max]`` with ``M(t) = int_0^t f dX``, from the moment ODE."""
    _, states = moment_flow_trajectory(f, r, n_max, t, steps)
    return states[-1].tolist()


def bdg_check(f: StepFunction, r: CumulantSequence, k: int, n: int):
    """Compare ``||f||_{n,mu^k}`` with ``|| |f|^(1/k) ||_{nk,mu}^k``.

    ``mu^k`` is the law with cumulants ``r_{ik}`` (the diagonal measure at
    time one).  Returns ``(lhs, rhs, holds)``; ``holds`` allows a rounding
    slack of ``1e-12 * max(1, rhs)``.
    """
    _check_even(n)
    r.require_nonnegative(n * k)
    lhs = mu_norm(f, diagonal_cumulants(r, k, 1, n), n)
    rhs = mu_norm(f.abs_root(k), r, n * k) ** k
    return lhs, rhs, lhs <= rhs + 1e-12 * max(1.0, rhs)
