"""Exact moment / free-cumulant conversion and a catalog of base laws.

A law is described by its free cumulants ``r_1, r_2, ...``.  Everything in
this module is exact: values are :class:`fractions.Fraction` and no floating
point is involved.

Moments are obtained from cumulants with the first-block recursion

    m_n = sum_{s=1}^{n} r_s * [x^(n-s)] M(x)^s,      M(x) = sum_i m_i x^i,

which is the noncrossing-partition sum ``m_n = sum_{pi in NC(n)} prod r_|B|``
grouped by the block containing 1.  The recursion is triangular in ``r_n``,
so the inverse map is read off the same table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, RegimeError, SizeError, TruncationError, ValidationError

MAX_MOMENT_ORDER = 64


def as_rational(x, name="value") -> Fraction:
    """Coerce ints, Fractions, ``"p/q"`` strings and floats (exactly) to Fraction."""
    if isinstance(x, bool):
        raise ValidationError(f"{name}: booleans are not numbers")
    if isinstance(x, (Fraction, int)):
        return Fraction(x)
    if isinstance(x, float):
        if not np.isfinite(x):
            raise ValidationError(f"{name}: non-finite value {x!r}")
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValidationError(f"{name}: cannot parse {x!r} as a rational") from exc
    raise ValidationError(f"{name}: unsupported type {type(x).__name__}")


@dataclass(frozen=True)
class FreeLevyData:
    """Closed form of an R-transform for drift + semicircular + finitely many jumps.

    ``R(w) = drift + variance * w + sum_j c_j a_j / (1 - a_j w)``, i.e.
    ``r_k = drift [k = 1] + variance [k = 2] + sum_j c_j a_j^k``, where each
    jump is ``(a_j, c_j)`` = (jump size, intensity).
    """

    drift: Fraction = Fraction(0)
    variance: Fraction = Fraction(0)
    jumps: tuple[tuple[Fraction, Fraction], ...] = ()

    def cumulant(self, k: int) -> Fraction:
        value = sum((c * a**k for a, c in self.jumps), Fraction(0))
        if k == 1:
            value += self.drift
        elif k == 2:
            value += self.variance
        return value

    def scaled(self, t: Fraction) -> "FreeLevyData":
        return FreeLevyData(self.drift * t, self.variance * t, tuple((a, c * t) for a, c in self.jumps))

    def __add__(self, other: "FreeLevyData") -> "FreeLevyData":
        return FreeLevyData(self.drift + other.drift, self.variance + other.variance, self.jumps + other.jumps)

    def r_transform(self, w):
        """Evaluate R and R' at complex points ``w`` (array-like)."""
        w = np.asarray(w, dtype=complex)
        value = float(self.drift) + float(self.variance) * w
        slope = np.full_like(w, float(self.variance))
        for a, c in self.jumps:
            a, c = float(a), float(c)
            denom = 1.0 - a * w
            value = value + c * a / denom
            slope = slope + c * a * a / denom**2
        return value, slope

    def to_json(self) -> dict:
        return {
            "drift": str(self.drift),
            "variance": str(self.variance),
            "jumps": [[str(a), str(c)] for a, c in self.jumps],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "FreeLevyData":
        if not isinstance(obj, Mapping):
            raise ValidationError("levy: expected an object")
        jumps = []
        for i, pair in enumerate(obj.get("jumps", [])):
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise ValidationError(f"levy.jumps[{i}]: expected [size, intensity]")
            jumps.append((as_rational(pair[0], f"levy.jumps[{i}][0]"), as_rational(pair[1], f"levy.jumps[{i}][1]")))
        return cls(
            as_rational(obj.get("drift", 0), "levy.drift"),
            as_rational(obj.get("variance", 0), "levy.variance"),
            tuple(jumps),
        )


@dataclass(frozen=True)
class CumulantSequence:
    """Free cumulants ``r_1..r_K`` of a compactly supported law.

    Parameters
    ----------
    values : sequence of rationals
        ``values[k-1]`` is ``r_k``.
    finitely_supported : bool
        If true, every cumulant beyond ``K`` is zero.  Otherwise the
        sequence is truncated and reading past ``K`` raises
        :class:`TruncationError` -- unless ``levy`` is given, in which case
        higher cumulants are computed exactly from the closed form.
    levy : FreeLevyData, optional
        Closed form of the R-transform, used for exact extension and by the
        numerical transforms.

    Notes
    -----
    ``r_2 = 1`` is not enforced; every formula here is normalization free.
    """

    values: tuple[Fraction, ...]
    finitely_supported: bool = False
    levy: FreeLevyData | None = field(default=None, compare=True)

    def __init__(self, values: Iterable, finitely_supported: bool = False, levy: FreeLevyData | None = None):
        vals = tuple(as_rational(v, f"r_{k}") for k, v in enumerate(values, start=1))
        if not vals:
            raise ValidationError("a cumulant sequence needs at least r_1")
        if levy is not None:
            for k, v in enumerate(vals, start=1):
                if levy.cumulant(k) != v:
                    raise ValidationError(f"r_{k} = {v} disagrees with the closed form ({levy.cumulant(k)})")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "finitely_supported", bool(finitely_supported))
        object.__setattr__(self, "levy", levy)

    @property
    def order(self) -> int:
        return len(self.values)

    @property
    def kind(self) -> str:
        return "finitely_supported" if self.finitely_supported else "truncated"

    def available(self, k: int) -> bool:
        return k <= self.order or self.finitely_supported or self.levy is not None

    def __getitem__(self, k: int) -> Fraction:
        if not isinstance(k, int) or k < 1:
            raise IndexError(f"free cumulants are indexed from 1, got {k!r}")
        if k <= self.order:
            return self.values[k - 1]
        if self.finitely_supported:
            return Fraction(0)
        if self.levy is not None:
            return self.levy.cumulant(k)
        raise TruncationError(f"r_{k} requested but the sequence is truncated at order {self.order}")

    def take(self, n: int) -> list[Fraction]:
        """``[r_1, ..., r_n]``."""
        return [self[k] for k in range(1, n + 1)]

    def extended(self, n: int) -> "CumulantSequence":
        """Copy carrying at least ``n`` explicit values (where derivable)."""
        if n <= self.order:
            return self
        return CumulantSequence(self.take(n), self.finitely_supported, self.levy)

    @property
    def is_semicircular(self) -> bool:
        """Only ``r_1`` and ``r_2`` may be nonzero."""
        if self.finitely_supported:
            return all(v == 0 for v in self.values[2:])
        return self.levy is not None and not self.levy.jumps

    def is_nonnegative(self, upto: int | None = None) -> bool:
        upto = self.order if upto is None else upto
        if self.levy is not None and upto > self.order:
            return all(self[k] >= 0 for k in range(1, upto + 1))
        return all(v >= 0 for v in self.values[:upto])

    def require_nonnegative(self, upto: int | None = None) -> None:
        if not self.is_nonnegative(upto):
            raise RegimeError("this operation requires all free cumulants to be non-negative")

    def r_transform(self, w):
        """R and R' at complex ``w``: closed form if known, else the truncated polynomial."""
        if self.levy is not None:
            return self.levy.r_transform(w)
        w = np.asarray(w, dtype=complex)
        coeffs = [float(v) for v in self.values]
        value = np.zeros_like(w)
        slope = np.zeros_like(w)
        for k in range(len(coeffs), 0, -1):
            slope = slope * w + value
            value = value * w + coeffs[k - 1]
        return value, slope

    def to_json(self) -> dict:
        obj = {"kind": self.kind, "values": [str(v) for v in self.values]}
        if self.levy is not None:
            obj["levy"] = self.levy.to_json()
        return obj

    @classmethod
    def from_json(cls, obj: Mapping) -> "CumulantSequence":
        if not isinstance(obj, Mapping):
            raise ValidationError("cumulant file: expected a JSON object")
        kind = obj.get("kind")
        if kind not in ("finitely_supported", "truncated"):
            raise ValidationError(f"cumulant file: field 'kind' must be 'finitely_supported' or 'truncated', got {kind!r}")
        values = obj.get("values")
        if not isinstance(values, list) or not values:
            raise ValidationError("cumulant file: field 'values' must be a nonempty list")
        levy = FreeLevyData.from_json(obj["levy"]) if "levy" in obj else None
        return cls([as_rational(v, f"values[{i}]") for i, v in enumerate(values)], kind == "finitely_supported", levy)


@dataclass(frozen=True)
class MomentSequence:
    """Moments ``m_1..m_K``; ``m_0 = 1`` is implicit."""

    values: tuple

    def __init__(self, values: Iterable):
        vals = tuple(values)
        if not vals:
            raise ValidationError("a moment sequence needs at least m_1")
        object.__setattr__(self, "values", vals)

    @property
    def order(self) -> int:
        return len(self.values)

    def __getitem__(self, k: int):
        if k == 0:
            return 1
        if not 1 <= k <= self.order:
            raise TruncationError(f"m_{k} requested but the sequence stops at order {self.order}")
        return self.values[k - 1]

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def to_json(self) -> dict:
        return {"values": [str(v) for v in self.values]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "MomentSequence":
        if not isinstance(obj, Mapping) or not isinstance(obj.get("values"), list) or not obj["values"]:
            raise ValidationError("moment file: expected {\"values\": [...]} with at least one entry")
        return cls(as_rational(v, f"values[{i}]") for i, v in enumerate(obj["values"]))


def _power_table_step(table, moments, q):
    # table[s][q] = [x^q] M(x)^s, filled for every s once m_q is known
    table[0].append(1 if q == 0 else 0)
    for s in range(1, len(table)):
        prev = table[s - 1]
        table[s].append(sum(moments[i] * prev[q - i] for i in range(q + 1)))


def moment_recursion(cumulants: Sequence, n: int) -> list:
    """``[m_1, ..., m_n]`` from ``[r_1, ..., r_n]`` over any commutative ring.

    Works for Fractions (exact) and floats alike; :func:`moments_from_cumulants`
    is the validated exact entry point.
    """
    r = list(cumulants)
    if len(r) < n:
        raise TruncationError(f"need {n} cumulants, got {len(r)}")
    moments = [1]
    table = [[] for _ in range(n + 1)]
    _power_table_step(table, moments, 0)
    for j in range(1, n + 1):
        moments.append(sum(r[s - 1] * table[s][j - s] for s in range(1, j + 1)))
        _power_table_step(table, moments, j)
    return moments[1:]


def cumulant_recursion(moments: Sequence, n: int) -> list:
    """Inverse of :func:`moment_recursion`."""
    m = list(moments)
    if len(m) < n:
        raise TruncationError(f"need {n} moments, got {len(m)}")
    full = [1] + m[:n]
    r = []
    table = [[] for _ in range(n + 1)]
    _power_table_step(table, full, 0)
    for j in range(1, n + 1):
        lower = sum(r[s - 1] * table[s][j - s] for s in range(1, j))
        r.append(full[j] - lower)
        _power_table_step(table, full, j)
    return r


def _check_order(n, what="order"):
    if not isinstance(n, int) or not 1 <= n <= MAX_MOMENT_ORDER:
        raise SizeError(f"{what} must be an integer in [1, {MAX_MOMENT_ORDER}], got {n!r}")


def moments_from_cumulants(r: CumulantSequence, n: int) -> MomentSequence:
    """Exact moments ``m_1..m_n`` of the law with free cumulants ``r``.

    Raises :class:`TruncationError` when ``r`` is truncated below ``n``.
    """
    _check_order(n)
    return MomentSequence(moment_recursion(r.take(n), n))


def cumulants_from_moments(m: MomentSequence, n: int) -> CumulantSequence:
    """The unique truncated cumulant sequence reproducing ``m_1..m_n``."""
    _check_order(n)
    if n > m.order:
        raise TruncationError(f"{n} cumulants requested from {m.order} moments")
    return CumulantSequence(cumulant_recursion([m[k] for k in range(1, n + 1)], n))


def semigroup_cumulants(r: CumulantSequence, t) -> CumulantSequence:
    """Cumulants of ``mu_t``: every ``r_k`` multiplied by ``t``."""
    t = as_rational(t, "t")
    if t < 0:
        raise DomainError(f"semigroup time must be non-negative, got {t}")
    levy = r.levy.scaled(t) if r.levy is not None else None
    return CumulantSequence([v * t for v in r.values], r.finitely_supported, levy)


def free_convolution(a: CumulantSequence, b: CumulantSequence) -> CumulantSequence:
    """Free additive convolution: cumulants add."""
    levy = a.levy + b.levy if a.levy is not None and b.levy is not None else None
    truncated = [x.order for x in (a, b) if not x.finitely_supported and x.levy is None]
    n = min(truncated) if truncated and levy is None else max(a.order, b.order)
    return CumulantSequence([a[k] + b[k] for k in range(1, n + 1)], a.finitely_supported and b.finitely_supported, levy)


DEFAULT_ORDER = 16


def catalog(name: str, **params) -> CumulantSequence:
    """Free cumulants of a named base law.

    ``semicircular(mean=0, variance=1)``
        ``r_1 = mean``, ``r_2 = variance``, all others zero.
    ``free_poisson(rate=1, jump=1, order=16)``
        ``r_k = rate * jump**k``.
    ``free_compound_poisson(rate, jump_moments=... | jumps={size: prob}, order=16)``
        ``r_k = rate * (k-th moment of the jump law)``.  With ``jump_moments``
        the result is truncated at ``len(jump_moments)``; with a finite jump
        law ``jumps`` the closed-form R-transform is attached.
    """
    key = name.lower().replace("-", "_")
    if key in ("semicircular", "semicircle"):
        mean = as_rational(params.pop("mean", 0), "mean")
        variance = as_rational(params.pop("variance", 1), "variance")
        _no_extra(params, name)
        if variance < 0:
            raise ValidationError(f"variance must be non-negative, got {variance}")
        return CumulantSequence([mean, variance], True, FreeLevyData(mean, variance))
    if key in ("free_poisson", "marchenko_pastur"):
        rate = _rate(params)
        jump = as_rational(params.pop("jump", 1), "jump")
        order = params.pop("order", DEFAULT_ORDER)
        _no_extra(params, name)
        levy = FreeLevyData(jumps=((jump, rate),))
        return CumulantSequence([levy.cumulant(k) for k in range(1, order + 1)], False, levy)
    if key == "free_compound_poisson":
        rate = _rate(params)
        order = params.pop("order", DEFAULT_ORDER)
        if "jump_moments" in params:
            moments = [as_rational(v, "jump_moments") for v in params.pop("jump_moments")]
            _no_extra(params, name)
            return CumulantSequence([rate * v for v in moments])
        jumps = params.pop("jumps", None)
        _no_extra(params, name)
        if not jumps:
            raise ValidationError("free_compound_poisson needs jump_moments or jumps")
        probs = {as_rational(a, "jump size"): as_rational(p, "jump probability") for a, p in dict(jumps).items()}
        if any(p < 0 for p in probs.values()) or sum(probs.values()) != 1:
            raise ValidationError("jump probabilities must be non-negative and sum to 1")
        levy = FreeLevyData(jumps=tuple((a, rate * p) for a, p in sorted(probs.items())))
        return CumulantSequence([levy.cumulant(k) for k in range(1, order + 1)], False, levy)
    raise ValidationError(f"unknown distribution {name!r}")


def _rate(params) -> Fraction:
    rate = as_rational(params.pop("rate", params.pop("lam", 1)), "rate")
    if rate <= 0:
        raise ValidationError(f"rate must be positive, got {rate}")
    return rate


def _no_extra(params, name):
    if params:
        raise ValidationError(f"unexpected parameters for {name}: {sorted(params)}")


def small_time_ratio(r: CumulantSequence, p: int, t) -> Fraction:
    """``m_p(t) / t`` for the semigroup ``mu_t``; tends to ``r_p`` as ``t -> 0``."""
    t = as_rational(t, "t")
    if not isinstance(p, int) or p < 2 or p % 2:
        raise DomainError(f"p must be an even integer >= 2, got {p!r}")
    if not 0 < t <= 1:
        raise DomainError(f"t must lie in (0, 1], got {t}")
    return moments_from_cumulants(semigroup_cumulants(r, t), p)[p] / t
