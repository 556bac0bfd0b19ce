"""Cauchy and R-transforms: exact formal series and numerical evaluation.

Formal side
    :class:`FormalLaurentSeries` is a truncated series with rational
    coefficients.  :func:`verify_functional_relation` composes
    ``G(1/z + R(z))`` formally and checks it equals ``z``.

Numerical side
    ``G(z)`` for ``Im z > 0`` is the fixed point of ``G = 1 / (z - R(G))``.
    A damped iteration started at ``1/z`` picks the branch with
    ``G(z) ~ 1/z`` at infinity; Newton steps then polish the root.  The
    density is recovered by Stieltjes inversion, and the distribution
    function by integrating ``G`` along a contour in the upper half-plane
    (see :class:`ContourCDF`), which resolves atoms that a grid on the real
    line would miss.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .cumulants import (
    CumulantSequence,
    MomentSequence,
    as_rational,
    moments_from_cumulants,
)
from .errors import CalibrationError, ConvergenceError, DomainError, TruncationError, ValidationError


class FormalLaurentSeries:
    """Truncated Laurent series ``sum_e c_e w^e`` with exact coefficients.

    Coefficients are known for every exponent ``e < precision``; anything
    at or above ``precision`` is unknown and never read.  ``variable`` names
    what ``w`` stands for (``"z"`` or ``"1/z"``) and only matters for
    :meth:`evaluate` and printing.
    """

    def __init__(self, coeffs: dict, precision: int, variable: str = "z"):
        if variable not in ("z", "1/z"):
            raise ValidationError(f"variable must be 'z' or '1/z', got {variable!r}")
        self.precision = int(precision)
        self.variable = variable
        self.coeffs = {
            int(e): Fraction(c) for e, c in coeffs.items() if e < self.precision and c != 0
        }

    @classmethod
    def monomial(cls, exponent: int, precision: int, coeff=1, variable="z"):
        return cls({exponent: coeff}, precision, variable)

    @property
    def valuation(self) -> int:
        """Lowest exponent with a nonzero coefficient (``precision`` if none)."""
        return min(self.coeffs, default=self.precision)

    def __getitem__(self, e: int) -> Fraction:
        if e >= self.precision:
            raise TruncationError(f"coefficient of w^{e} is beyond the precision {self.precision}")
        return self.coeffs.get(e, Fraction(0))

    def _compatible(self, other):
        if isinstance(other, (int, Fraction)):
            return FormalLaurentSeries({0: other}, self.precision, self.variable)
        if other.variable != self.variable:
            raise ValidationError("cannot mix series in z and in 1/z")
        return other

    def __add__(self, other):
        other = self._compatible(other)
        prec = min(self.precision, other.precision)
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out.get(e, 0) + c
        return FormalLaurentSeries(out, prec, self.variable)

    __radd__ = __add__

    def __neg__(self):
        return FormalLaurentSeries({e: -c for e, c in self.coeffs.items()}, self.precision, self.variable)

    def __sub__(self, other):
        return self + (-self._compatible(other))

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return FormalLaurentSeries({e: c * other for e, c in self.coeffs.items()}, self.precision, self.variable)
        other = self._compatible(other)
        prec = min(self.precision + other.valuation, other.precision + self.valuation)
        out: dict[int, Fraction] = {}
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                if e1 + e2 < prec:
                    out[e1 + e2] = out.get(e1 + e2, 0) + c1 * c2
        return FormalLaurentSeries(out, prec, self.variable)

    __rmul__ = __mul__

    def reciprocal(self) -> "FormalLaurentSeries":
        """``1 / self``; the leading coefficient must be known and nonzero."""
        v = self.valuation
        if v >= self.precision:
            raise ZeroDivisionError("series is zero to within its precision")
        lead = self.coeffs[v]
        prec = self.precision - 2 * v
        # unit part u(w) = self / (lead w^v) = 1 + ..., inverted term by term
        unit = [self[v + i] / lead for i in range(self.precision - v)]
        inv = [Fraction(1)]
        for i in range(1, prec + v):
            inv.append(-sum(unit[j] * inv[i - j] for j in range(1, min(i, len(unit) - 1) + 1)))
        return FormalLaurentSeries({i - v: c / lead for i, c in enumerate(inv)}, prec, self.variable)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        if k == 0:
            return FormalLaurentSeries({0: 1}, self.precision - self.valuation, self.variable)
        result = self
        for _ in range(k - 1):
            result = result * self
        return result

    def compose(self, inner: "FormalLaurentSeries") -> "FormalLaurentSeries":
        """``self(inner(.))`` for ``self`` a power series and ``inner`` of valuation >= 1."""
        if self.valuation < 0:
            raise ValidationError("outer series must not have negative exponents")
        v = inner.valuation
        if v < 1:
            raise ValidationError("inner series must have positive valuation")
        prec = min(self.precision * v, inner.precision)
        total = FormalLaurentSeries({}, prec, inner.variable)
        power = FormalLaurentSeries({0: 1}, prec, inner.variable)
        for e in range(self.precision):
            if e:
                power = power * inner
            c = self.coeffs.get(e)
            if c:
                total = total + power * c
        return FormalLaurentSeries(total.coeffs, prec, inner.variable)

    def evaluate(self, z) -> complex:
        """Sum the stored terms at the point ``z``."""
        w = 1 / complex(z) if self.variable == "1/z" else complex(z)
        return sum(float(c) * w**e for e, c in self.coeffs.items())

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other):
        if not isinstance(other, FormalLaurentSeries):
            return NotImplemented
        return (self.precision, self.variable, self.coeffs) == (other.precision, other.variable, other.coeffs)

    def __repr__(self):
        terms = " + ".join(f"({c})*w^{e}" for e, c in sorted(self.coeffs.items())) or "0"
        return f"FormalLaurentSeries[{terms} + O(w^{self.precision}), w={self.variable}]"


def cauchy_series(m: MomentSequence, order: int) -> FormalLaurentSeries:
    """``G(z) = sum_{k=0}^{order} m_k z^-(k+1)`` as a series in ``w = 1/z``."""
    if order > m.order:
        raise TruncationError(f"order {order} exceeds the {m.order} available moments")
    return FormalLaurentSeries({k + 1: m[k] for k in range(order + 1)}, order + 2, "1/z")


def r_series(r: CumulantSequence, order: int) -> FormalLaurentSeries:
    """``R(z) = sum_{k=1}^{order} r_k z^(k-1)``, known through ``z^(order-1)``."""
    return FormalLaurentSeries({k - 1: r[k] for k in range(1, order + 1)}, order, "z")


def verify_functional_relation(r: CumulantSequence, order: int, moments: MomentSequence | None = None) -> bool:
    """Check ``G(1/z + R(z)) = z`` coefficientwise through ``z^(order+1)``.

    ``G`` is built from ``moments`` (default: the moments of ``r``), ``R``
    from ``r``.  Passing moments of another law is how a mismatch is tested.
    """
    if not 1 <= order <= 12:
        raise DomainError(f"order must lie in [1, 12], got {order}")
    m = moments_from_cumulants(r, order) if moments is None else moments
    g = cauchy_series(m, order)
    g_in_w = FormalLaurentSeries(g.coeffs, g.precision, "z")  # same coefficients, w as the variable
    z = FormalLaurentSeries.monomial(1, order + 2)
    # 1 / (1/z + R(z)) = z / (1 + z R(z)), a series of valuation 1
    inner = z * (1 + z * r_series(r, order)).reciprocal()
    residual = g_in_w.compose(inner) - z
    return all(residual[e] == 0 for e in range(order + 2))


RFunc = Callable[[np.ndarray], tuple]


def _rfunc(r: CumulantSequence, t: float = 1.0) -> RFunc:
    if t == 1.0:
        return r.r_transform

    def scaled(w):
        value, slope = r.r_transform(w)
        return t * value, t * slope

    return scaled


def _solve(z, rfunc: RFunc, damping=0.5, fp_iters=400, newton_iters=60, tol=1e-12):
    z = np.asarray(z, dtype=complex)
    g = 1.0 / z
    for _ in range(fp_iters):
        value, _ = rfunc(g)
        update = 1.0 / (z - value)
        gap = np.abs(update - g)
        g = (1.0 - damping) * g + damping * update
        if np.all(gap <= 1e-3 * np.maximum(1.0, np.abs(g))):
            break
    for _ in range(newton_iters):
        value, slope = rfunc(g)
        h = g * (z - value) - 1.0
        dh = z - value - g * slope
        step = h / dh
        g = g - step
        if np.all(np.abs(step) <= 1e-15 * np.maximum(1.0, np.abs(g))):
            break
    value, _ = rfunc(g)
    residual = np.abs(g - 1.0 / (z - value)) / np.maximum(1.0, np.abs(g))
    bad = ~(residual <= tol) | (g.imag > 1e-12 * np.maximum(1.0, np.abs(g)))
    if np.any(bad):
        worst = float(np.nanmax(np.where(np.isfinite(residual), residual, np.inf)))
        where = z[bad].ravel()[0]
        raise ConvergenceError(f"Cauchy transform solver failed at z={where}, residual {worst:.3e}", residual=worst)
    return g


def cauchy_transform(r: CumulantSequence, z, t: float = 1.0):
    """Vectorized ``G_{mu_t}(z)`` for an array of points with ``Im z > 0``."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise DomainError("the Cauchy transform is evaluated in the upper half-plane only")
    return _solve(z, _rfunc(r, t))


def cauchy_numeric(r: CumulantSequence, z) -> complex:
    """``G(z)`` at one point of the upper half-plane.

    The result satisfies ``|G - 1/(z - R(G))| < 1e-12`` (relative to
    ``max(1, |G|)``) and ``Im G <= 0``.  When ``r`` carries no closed form,
    ``R`` is the polynomial built from the stored cumulants, so the value
    depends on the truncation order.
    """
    return complex(cauchy_transform(r, np.array([complex(z)]))[0])


def density(r: CumulantSequence, x, eps: float = 1e-6):
    """Stieltjes inversion ``-Im G(x + i eps) / pi``, clamped at zero."""
    if not 1e-8 <= eps <= 1e-2:
        raise DomainError(f"eps must lie in [1e-8, 1e-2], got {eps}")
    x = np.asarray(x, dtype=float)
    g = cauchy_transform(r, x + 1j * eps)
    out = np.maximum(-g.imag / np.pi, 0.0)
    return float(out) if out.ndim == 0 else out


def support_bound(r: CumulantSequence) -> float:
    """Crude bracket ``M`` with the law supported inside ``[-M, M]``."""
    growth = max((abs(float(v)) ** (1.0 / k) for k, v in enumerate(r.values, start=1)), default=0.0)
    return 2.0 * max(1.0, growth) * (r.order + 1)


class ContourCDF:
    """Distribution function of ``r`` from contour integrals of ``G``.

    With ``Phi(z) = int log(z - s) dnu(s)`` one has ``Phi' = G`` and
    ``Im Phi(x + i eps) / pi`` is, up to ``O(eps)`` smearing, the mass to
    the right of ``x``.  So

        F(x) = -(1/pi) Im int_gamma G(w) dw,

    where ``gamma`` runs from ``-M + i eps`` up to ``-M + iH``, across to
    ``x + iH`` and down to ``x + i eps``.  The horizontal leg is smooth; the
    vertical legs are integrated in ``log y`` so that atoms and square-root
    edges near the real axis are resolved.
    """

    def __init__(self, r: CumulantSequence, eps: float = 1e-8, height: float = 1.0,
                 bound: float | None = None, vertical_nodes: int = 96):
        self.r = r
        self.eps = float(eps)
        self.height = float(height)
        self.bound = support_bound(r) if bound is None else float(bound)
        u, w = np.polynomial.legendre.leggauss(vertical_nodes)
        lo, hi = np.log(self.eps), np.log(self.height)
        self._y = np.exp(0.5 * (hi - lo) * u + 0.5 * (hi + lo))
        self._wy = 0.5 * (hi - lo) * w * self._y
        self._gl = np.polynomial.legendre.leggauss(6)
        cells = max(8, int(np.ceil(2 * self.bound / (0.1 * self.height))))
        self._edges = np.linspace(-self.bound, self.bound, cells + 1)
        pieces = self._horizontal(self._edges[:-1], self._edges[1:])
        self._hcum = np.concatenate([[0.0], np.cumsum(pieces)])
        self._start = self._vertical(np.array([-self.bound]))[0]

    def _vertical(self, xs):
        z = xs[:, None] + 1j * self._y[None, :]
        g = cauchy_transform(self.r, z.ravel()).reshape(z.shape)
        return 1j * (g * self._wy[None, :]).sum(axis=1)

    def _horizontal(self, lo, hi):
        nodes, weights = self._gl
        s = 0.5 * (hi - lo)[:, None] * nodes[None, :] + 0.5 * (hi + lo)[:, None]
        g = cauchy_transform(self.r, (s + 1j * self.height).ravel()).reshape(s.shape)
        return (g * weights[None, :]).sum(axis=1) * 0.5 * (hi - lo)

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        clipped = np.clip(x, -self.bound, self.bound)
        cell = np.clip(np.searchsorted(self._edges, clipped, side="right") - 1, 0, len(self._edges) - 2)
        across = self._hcum[cell] + self._horizontal(self._edges[cell], clipped)
        path = self._start + across - self._vertical(clipped)
        return -path.imag / np.pi

    def mass(self) -> float:
        return float(self(np.array([self.bound]))[0])


def cdf(r: CumulantSequence, x, eps: float = 1e-8):
    """Distribution function at ``x`` (smeared by a Cauchy kernel of width ``eps``)."""
    out = ContourCDF(r, eps)(x)
    return float(out[0]) if np.ndim(x) == 0 else out


def _point_mass(r: CumulantSequence):
    if r.finitely_supported or r.levy is not None:
        if all(v == 0 for v in r.values[1:]) and (r.levy is None or (r.levy.variance == 0 and all(c == 0 for _, c in r.levy.jumps))):
            return float(r.values[0])
    return None


def quantiles(r: CumulantSequence, N: int, eps: float = 1e-8, grid: int = 2000, mass_tol: float = 1e-3) -> np.ndarray:
    """Points ``x_k`` with ``F(x_k) = (k - 1/2) / N``, ``k = 1..N``.

    Raises :class:`CalibrationError` if the computed total mass differs from
    one by more than ``mass_tol``.
    """
    if not isinstance(N, int) or N < 1:
        raise DomainError(f"N must be a positive integer, got {N!r}")
    atom = _point_mass(r)
    if atom is not None:
        return np.full(N, atom)
    F = ContourCDF(r, eps)
    xs = np.linspace(-F.bound, F.bound, grid + 1)
    values = np.maximum.accumulate(F(xs))
    if abs(values[-1] - 1.0) > mass_tol:
        raise CalibrationError(f"integrated density has mass {values[-1]:.6f}, not 1")
    targets = (np.arange(1, N + 1) - 0.5) / N
    j = np.clip(np.searchsorted(values, targets, side="right") - 1, 0, grid - 1)
    lo, hi = xs[j].copy(), xs[j + 1].copy()
    flo, fhi = values[j] - targets, values[j + 1] - targets
    side = np.zeros(N, dtype=int)
    active = np.ones(N, dtype=bool)
    for it in range(200):
        active &= (hi - lo) > 1e-13 * (1.0 + np.abs(lo))
        if not active.any():
            break
        a = np.flatnonzero(active)
        # Illinois regula falsi; every third step bisects so atoms cannot stall it
        denom = fhi[a] - flo[a]
        secant = (lo[a] * fhi[a] - hi[a] * flo[a]) / np.where(denom > 0, denom, 1.0)
        mid = np.where((it % 3 == 2) | ~(denom > 0), 0.5 * (lo[a] + hi[a]), secant)
        mid = np.clip(mid, lo[a], hi[a])
        fmid = F(mid) - targets[a]
        right = fmid > 0
        hi[a] = np.where(right, mid, hi[a])
        lo[a] = np.where(right, lo[a], mid)
        fhi[a] = np.where(right, fmid, np.where(side[a] == -1, 0.5 * fhi[a], fhi[a]))
        flo[a] = np.where(right, np.where(side[a] == 1, 0.5 * flo[a], flo[a]), fmid)
        side[a] = np.where(right, 1, -1)
        hit = np.abs(fmid) < 1e-14
        lo[a[hit]] = hi[a[hit]] = mid[hit]
    return np.maximum.accumulate(0.5 * (lo + hi))


def pde_residual(r: CumulantSequence, z, t: float, h: float) -> float:
    """``|d_t G + R(G) d_z G|`` for ``G = G_{mu_t}(z)`` by central differences.

    ``R`` is the R-transform of the base law ``r``.  For a law with
    ``G_{mu_t}`` the exact solution this residual is ``O(h^2)``.
    """
    z = complex(z)
    if z.imag < 0.5:
        raise DomainError(f"need Im z >= 0.5, got {z.imag}")
    if not 1e-5 <= h <= 1e-2:
        raise DomainError(f"h must lie in [1e-5, 1e-2], got {h}")
    if t - h <= 0:
        raise DomainError(f"need t > h, got t={t}, h={h}")
    points = np.array([z, z, z + h, z - h, z])
    times = [t + h, t - h, t, t, t]
    values = np.array([complex(_solve(np.array([p]), _rfunc(r, s))[0]) for p, s in zip(points, times)])
    dt = (values[0] - values[1]) / (2 * h)
    dz = (values[2] - values[3]) / (2 * h)
    g = values[4]
    rg, _ = r.r_transform(np.array([g]))
    return float(abs(dt + rg[0] * dz))


def pde_convergence(r: CumulantSequence, z, t: float, h: float, levels: int = 3):
    """Residuals at ``h, h/2, h/4, ...`` and the observed orders between levels."""
    steps = [h / 2**i for i in range(levels)]
    residuals = [pde_residual(r, z, t, s) for s in steps]
    orders = [float(np.log2(a / b)) if b > 0 else float("inf") for a, b in zip(residuals, residuals[1:])]
    return steps, residuals, orders
