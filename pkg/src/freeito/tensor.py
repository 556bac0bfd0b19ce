"""Tensor polynomials and the higher free difference quotients.

A :class:`TensorPolynomial` of arity ``k+1`` is a rational combination of
words ``x^{i0} (x) x^{i1} (x) ... (x) x^{ik}``, stored as a map from the
exponent tuple to its coefficient.  Polynomials in one variable are plain
coefficient lists, ``p[i]`` being the coefficient of ``x^i`` (a dict
``{exponent: coeff}`` is also accepted).
"""

from __future__ import annotations

from fractions import Fraction
from itertools import product
from math import factorial
from typing import Iterator, Mapping, Sequence

from .cumulants import as_rational
from .errors import DomainError, ValidationError


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All tuples of ``parts`` non-negative integers summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in compositions(total - head, parts - 1):
            yield (head,) + tail


def positive_compositions(total: int, parts: int, largest: int | None = None) -> Iterator[tuple[int, ...]]:
    """Tuples of ``parts`` integers in ``[1, largest]`` summing to ``total``."""
    largest = total if largest is None else largest
    if parts == 0:
        if total == 0:
            yield ()
        return
    for head in range(1, min(largest, total - parts + 1) + 1):
        for tail in positive_compositions(total - head, parts - 1, largest):
            yield (head,) + tail


def as_polynomial(p) -> dict[int, Fraction]:
    """Normalize a polynomial to ``{exponent: Fraction}`` with zero terms dropped."""
    if isinstance(p, Mapping):
        items = p.items()
    elif isinstance(p, Sequence) and not isinstance(p, str):
        items = enumerate(p)
    else:
        items = [(0, p)]
    out = {}
    for e, c in items:
        if not isinstance(e, int) or e < 0:
            raise ValidationError(f"polynomial exponents must be non-negative integers, got {e!r}")
        c = as_rational(c, f"coefficient of x^{e}")
        if c:
            out[e] = out.get(e, 0) + c
    return out


class TensorPolynomial:
    """Finite rational combination of tensor words of a fixed arity."""

    __slots__ = ("arity", "terms")

    def __init__(self, arity: int, terms: Mapping[tuple[int, ...], object] | None = None):
        if not isinstance(arity, int) or arity < 1:
            raise ValidationError(f"arity must be a positive integer, got {arity!r}")
        self.arity = arity
        self.terms: dict[tuple[int, ...], Fraction] = {}
        for word, c in (terms or {}).items():
            word = tuple(int(i) for i in word)
            if len(word) != arity or any(i < 0 for i in word):
                raise ValidationError(f"word {word} does not have arity {arity}")
            self._accumulate(word, Fraction(c))

    def _accumulate(self, word, c):
        value = self.terms.get(word, 0) + c
        if value:
            self.terms[word] = value
        else:
            self.terms.pop(word, None)

    @classmethod
    def word(cls, *exponents: int, coeff=1) -> "TensorPolynomial":
        return cls(len(exponents), {tuple(exponents): coeff})

    def _check(self, other: "TensorPolynomial"):
        if not isinstance(other, TensorPolynomial) or other.arity != self.arity:
            raise ValidationError("tensor polynomials of different arity")

    def __add__(self, other: "TensorPolynomial") -> "TensorPolynomial":
        self._check(other)
        out = TensorPolynomial(self.arity, self.terms)
        for w, c in other.terms.items():
            out._accumulate(w, c)
        return out

    def __sub__(self, other: "TensorPolynomial") -> "TensorPolynomial":
        return self + other * -1

    def __mul__(self, c) -> "TensorPolynomial":
        c = as_rational(c, "scalar")
        return TensorPolynomial(self.arity, {w: v * c for w, v in self.terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, c) -> "TensorPolynomial":
        return self * (1 / as_rational(c, "divisor"))

    def __eq__(self, other):
        if not isinstance(other, TensorPolynomial):
            return NotImplemented
        return self.arity == other.arity and self.terms == other.terms

    def __iter__(self):
        return iter(sorted(self.terms.items()))

    def __len__(self):
        return len(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def times_last(self, e: int = 1) -> "TensorPolynomial":
        """``(1 (x) ... (x) x^e) * self``: raise the last exponent by ``e``."""
        return TensorPolynomial(self.arity, {w[:-1] + (w[-1] + e,): c for w, c in self.terms.items()})

    def append_one(self) -> "TensorPolynomial":
        """``self (x) 1``."""
        return TensorPolynomial(self.arity + 1, {w + (0,): c for w, c in self.terms.items()})

    def degree(self) -> int:
        return max((sum(w) for w in self.terms), default=-1)

    def truncate(self, max_degree: int) -> "TensorPolynomial":
        """Keep words of total degree ``<= max_degree``."""
        return TensorPolynomial(self.arity, {w: c for w, c in self.terms.items() if sum(w) <= max_degree})

    def __repr__(self):
        if not self.terms:
            return f"TensorPolynomial(arity={self.arity}, 0)"
        body = " + ".join(f"{c}*" + "(x)".join(f"x^{i}" for i in w) for w, c in self)
        return f"TensorPolynomial({body})"


def polynomial_as_tensor(p) -> TensorPolynomial:
    """A one-variable polynomial viewed as an arity-1 tensor polynomial."""
    return TensorPolynomial(1, {(e,): c for e, c in as_polynomial(p).items()})


def _check_k(k):
    if not isinstance(k, int) or k < 1:
        raise DomainError(f"k must be a positive integer, got {k!r}")


def partial_k(p, k: int) -> TensorPolynomial:
    """``d^k p`` from the monomial formula.

    ``d^k x^n = k! * sum over (i0, ..., ik) with i0 + ... + ik = n - k of
    x^{i0} (x) ... (x) x^{ik}``, extended linearly; zero when ``k > deg p``.

    >>> partial_k([0, 1], 1)
    TensorPolynomial(1*x^0(x)x^0)
    """
    _check_k(k)
    out = TensorPolynomial(k + 1)
    scale = factorial(k)
    for n, c in as_polynomial(p).items():
        if n < k:
            continue
        for word in compositions(n - k, k + 1):
            out._accumulate(word, c * scale)
    return out


def _partial_once(tp: TensorPolynomial) -> TensorPolynomial:
    # apply d to the last factor: d x^n = sum_{a+b=n-1} x^a (x) x^b
    out = TensorPolynomial(tp.arity + 1)
    for w, c in tp.terms.items():
        n = w[-1]
        for a in range(n):
            out._accumulate(w[:-1] + (a, n - 1 - a), c)
    return out


def iterated_partial(p, k: int) -> TensorPolynomial:
    """``d^k p`` via ``d^k = k (1 (x) ... (x) d) d^{k-1}``, starting from ``d^0 = id``."""
    _check_k(k)
    tp = polynomial_as_tensor(p)
    for j in range(1, k + 1):
        tp = _partial_once(tp) * j
    return tp


def derivation_identity_check(p, k: int) -> bool:
    """Exact check of ``d^k(p x) = (1 (x) ... (x) x) d^k p + k d^{k-1} p (x) 1``."""
    _check_k(k)
    poly = as_polynomial(p)
    shifted = {e + 1: c for e, c in poly.items()}
    lhs = partial_k(shifted, k)
    lower = partial_k(poly, k - 1) if k > 1 else polynomial_as_tensor(poly)
    rhs = partial_k(poly, k).times_last() + lower.append_one() * k
    return lhs == rhs


def resolvent_polynomial(z, d: int) -> dict[int, Fraction]:
    """``p_d(x) = sum_{j=0}^{d} z^-(j+1) x^j``, the truncated resolvent ``(z - x)^-1``."""
    z = as_rational(z, "z")
    if z == 0:
        raise DomainError("z must be nonzero")
    return {j: z ** -(j + 1) for j in range(d + 1)}


def resolvent_tensor(z, arity: int, max_degree: int) -> TensorPolynomial:
    """Words of total degree ``<= max_degree`` of ``R (x) ... (x) R``, ``R = (z - x)^-1``."""
    z = as_rational(z, "z")
    terms = {}
    for word in product(range(max_degree + 1), repeat=arity):
        if sum(word) <= max_degree:
            terms[word] = z ** -(sum(word) + arity)
    return TensorPolynomial(arity, terms)


def resolvent_identity_check(z, d: int, k: int) -> bool:
    """``d^k p_d / k!`` equals the degree ``<= d-k`` part of ``R^{(x)(k+1)}``, exactly."""
    _check_k(k)
    if k > d:
        return partial_k(resolvent_polynomial(z, d), k).is_zero()
    lhs = partial_k(resolvent_polynomial(z, d), k) / factorial(k)
    return lhs == resolvent_tensor(z, k + 1, d - k)
