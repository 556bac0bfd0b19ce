"""Concrete tensors of matrices and the biprocess operations on them.

An :class:`OperatorTensor` of arity ``k+1`` is a finite sum
``sum_j c_j F_j0 (x) ... (x) F_jk`` of elementary tensors of ``N x N``
matrices.  The state is the normalized trace ``phi = tr / N``.

Each factor is one of

* ``ONE`` -- the identity, never materialized;
* a 1-D array -- a diagonal matrix given by its diagonal;
* a 2-D array -- a dense matrix.

Keeping identities and diagonals symbolic makes the large-``N`` Monte Carlo
checks cheap: most products and traces then cost ``O(N)`` or ``O(N^2)``.

Arity-2 tensors are elements of ``A (x) A^op`` and act on matrices by
``(A (x) B) # a = A a B``; their product is ``(A (x) B)(C (x) D) = AC (x) DB``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import SizeError, ValidationError
from .tensor import TensorPolynomial


class _One:
    __slots__ = ()

    def __repr__(self):
        return "ONE"


ONE = _One()


def _dim(F) -> int | None:
    return None if F is ONE else F.shape[0]


def _as_factor(F):
    if F is ONE or F is None:
        return ONE
    arr = np.asarray(F)
    if arr.ndim == 2 and arr.shape[0] != arr.shape[1]:
        raise SizeError(f"factor must be square, got shape {arr.shape}")
    if arr.ndim not in (1, 2):
        raise SizeError("factor must be a matrix or a diagonal vector")
    return arr


def mul(X, Y):
    """Matrix product of two factors."""
    if X is ONE:
        return Y
    if Y is ONE:
        return X
    if X.ndim == 1 and Y.ndim == 1:
        return X * Y
    if X.ndim == 1:
        return X[:, None] * Y
    if Y.ndim == 1:
        return X * Y[None, :]
    return X @ Y


def trace(X, N: int) -> complex:
    """``phi[X] = tr(X) / N``."""
    if X is ONE:
        return 1.0
    if X.ndim == 1:
        return X.sum() / N
    return np.trace(X) / N


def trace_product(X, Y, N: int) -> complex:
    """``phi[XY]`` without forming the product."""
    if X is ONE:
        return trace(Y, N)
    if Y is ONE:
        return trace(X, N)
    if X.ndim == 1 and Y.ndim == 1:
        return (X * Y).sum() / N
    if X.ndim == 1:
        return (X * np.diagonal(Y)).sum() / N
    if Y.ndim == 1:
        return (np.diagonal(X) * Y).sum() / N
    return np.einsum("ij,ji->", X, Y) / N


def adjoint_factor(X):
    if X is ONE:
        return ONE
    return X.conj() if X.ndim == 1 else X.conj().T


def dense_factor(X, N: int) -> np.ndarray:
    if X is ONE:
        return np.eye(N, dtype=complex)
    if X.ndim == 1:
        return np.diag(X).astype(complex)
    return np.asarray(X, dtype=complex)


def factor_norm(X) -> float:
    """Spectral norm of a factor."""
    if X is ONE:
        return 1.0
    if X.ndim == 1:
        return float(np.abs(X).max()) if X.size else 0.0
    return float(np.linalg.norm(X, 2))


def matrix_power(M, e: int):
    if e == 0:
        return ONE
    if M is not ONE and M.ndim == 1:
        return M**e
    out = M
    for _ in range(e - 1):
        out = mul(out, M)
    return out


class OperatorTensor:
    """A finite sum of elementary tensors of ``N x N`` matrices.

    Parameters
    ----------
    N : int
        Matrix dimension.
    arity : int
        Number of tensor factors.
    terms : iterable of (coefficient, factors)
        ``factors`` is a sequence of length ``arity``.
    """

    __slots__ = ("N", "arity", "terms")

    def __init__(self, N: int, arity: int, terms: Iterable = ()):
        if not isinstance(N, int) or N < 1:
            raise SizeError(f"dimension must be a positive integer, got {N!r}")
        if not isinstance(arity, int) or arity < 1:
            raise ValidationError(f"arity must be a positive integer, got {arity!r}")
        self.N, self.arity = N, arity
        self.terms: list[tuple[complex, tuple]] = []
        for c, factors in terms:
            factors = tuple(_as_factor(F) for F in factors)
            if len(factors) != arity:
                raise ValidationError(f"elementary tensor with {len(factors)} factors in an arity-{arity} tensor")
            for F in factors:
                if F is not ONE and F.shape[0] != N:
                    raise SizeError(f"factor of size {F.shape[0]} in a tensor over {N}x{N} matrices")
            if c != 0:
                self.terms.append((complex(c), factors))

    @classmethod
    def elementary(cls, *factors, coeff=1.0, N: int | None = None) -> "OperatorTensor":
        dims = {_dim(_as_factor(F)) for F in factors} - {None}
        if N is None:
            if not dims:
                raise SizeError("pass N when every factor is ONE")
            N = dims.pop()
        return cls(N, len(factors), [(coeff, factors)])

    @classmethod
    def identity(cls, N: int, arity: int = 2) -> "OperatorTensor":
        return cls(N, arity, [(1.0, (ONE,) * arity)])

    @classmethod
    def zero(cls, N: int, arity: int = 2) -> "OperatorTensor":
        return cls(N, arity)

    def _check(self, other: "OperatorTensor", arity: int | None = None):
        if not isinstance(other, OperatorTensor):
            raise ValidationError(f"expected an OperatorTensor, got {type(other).__name__}")
        if other.N != self.N:
            raise SizeError(f"dimension mismatch: {self.N} vs {other.N}")
        if arity is not None and (self.arity != arity or other.arity != arity):
            raise ValidationError(f"operation needs arity {arity}")
        if arity is None and other.arity != self.arity:
            raise ValidationError(f"arity mismatch: {self.arity} vs {other.arity}")

    def __add__(self, other: "OperatorTensor") -> "OperatorTensor":
        self._check(other)
        out = OperatorTensor(self.N, self.arity)
        out.terms = self.terms + other.terms
        return out

    def __sub__(self, other: "OperatorTensor") -> "OperatorTensor":
        return self + other * -1.0

    def __mul__(self, c) -> "OperatorTensor":
        out = OperatorTensor(self.N, self.arity)
        out.terms = [(coef * c, f) for coef, f in self.terms if coef * c != 0]
        return out

    __rmul__ = __mul__

    def __len__(self):
        return len(self.terms)

    def __matmul__(self, other: "OperatorTensor") -> "OperatorTensor":
        """Product in ``A (x) A^op``: ``(A (x) B)(C (x) D) = AC (x) DB``."""
        self._check(other, arity=2)
        out = OperatorTensor(self.N, 2)
        out.terms = [(a * b, (mul(A, C), mul(D, B))) for a, (A, B) in self.terms for b, (C, D) in other.terms]
        return out

    def adjoint(self) -> "OperatorTensor":
        """Involution: ``(F_0 (x) ... (x) F_k)* = F_k* (x) ... (x) F_0*``."""
        out = OperatorTensor(self.N, self.arity)
        out.terms = [(np.conj(c), tuple(adjoint_factor(F) for F in reversed(f))) for c, f in self.terms]
        return out

    def multiply(self) -> np.ndarray:
        """``m(F_0 (x) ... (x) F_k) = F_0 F_1 ... F_k`` as a dense matrix."""
        total = np.zeros((self.N, self.N), dtype=complex)
        for c, factors in self.terms:
            prod = ONE
            for F in factors:
                prod = mul(prod, F)
            total += c * dense_factor(prod, self.N)
        return total

    def trace_of_multiply(self) -> complex:
        """``phi[m(U)]``."""
        if self.arity != 2:
            return trace(self.multiply(), self.N)
        return sum(c * trace_product(A, B, self.N) for c, (A, B) in self.terms)

    def dense(self) -> np.ndarray:
        """Matrix of ``a -> U # a`` on row-major ``vec(a)``: ``sum c kron(A, B^T)``."""
        if self.arity != 2:
            raise ValidationError("dense representation is defined for arity 2")
        N = self.N
        out = np.zeros((N * N, N * N), dtype=complex)
        for c, (A, B) in self.terms:
            out += c * np.kron(dense_factor(A, N), dense_factor(B, N).T)
        return out

    def compress(self, atol: float = 0.0) -> "OperatorTensor":
        """Merge terms with identical factor objects and drop tiny coefficients."""
        merged: dict[tuple, list] = {}
        for c, f in self.terms:
            key = tuple(id(F) for F in f)
            if key in merged:
                merged[key][0] += c
            else:
                merged[key] = [c, f]
        out = OperatorTensor(self.N, self.arity)
        out.terms = [(c, f) for c, f in merged.values() if abs(c) > atol]
        return out

    def __repr__(self):
        return f"OperatorTensor(N={self.N}, arity={self.arity}, terms={len(self.terms)})"


def from_polynomial(tp: TensorPolynomial, M) -> OperatorTensor:
    """Substitute the matrix ``M`` into every factor of a tensor polynomial."""
    M = _as_factor(M)
    if M is ONE:
        raise ValidationError("substitute a concrete matrix")
    N = M.shape[0]
    powers = {0: ONE}
    for word, _ in tp:
        for e in word:
            if e not in powers:
                powers[e] = matrix_power(M, e)
    return OperatorTensor(N, tp.arity, [(float(c), tuple(powers[e] for e in word)) for word, c in tp])


def apply_sharp(u: OperatorTensor, a) -> np.ndarray:
    """``u # a = sum c A a B`` for an arity-2 tensor ``u``."""
    if u.arity != 2:
        raise ValidationError("u # a needs an arity-2 tensor")
    a = np.asarray(a)
    if a.shape != (u.N, u.N):
        raise SizeError(f"matrix of shape {a.shape} does not match N={u.N}")
    out = np.zeros((u.N, u.N), dtype=complex)
    for c, (A, B) in u.terms:
        out += c * dense_factor(mul(mul(A, a), B), u.N)
    return out


def phi_contract(x: OperatorTensor) -> OperatorTensor:
    """``phi_k = I (x) phi (x) ... (x) phi (x) I``: trace out the middle factors."""
    if x.arity < 2:
        raise ValidationError("contraction needs arity >= 2")
    if x.arity == 2:
        return x
    out = OperatorTensor(x.N, 2)
    for c, f in x.terms:
        scale = c
        for F in f[1:-1]:
            scale *= trace(F, x.N)
        if scale != 0:
            out.terms.append((scale, (f[0], f[-1])))
    return out


def otimes2(u: OperatorTensor, v: OperatorTensor) -> OperatorTensor:
    """``(A (x) B) (x)_2 (C (x) D) = phi[BC] A (x) D``, bilinearly."""
    u._check(v, arity=2)
    out = OperatorTensor(u.N, 2)
    for a, (A, B) in u.terms:
        for b, (C, D) in v.terms:
            scale = a * b * trace_product(B, C, u.N)
            if scale != 0:
                out.terms.append((scale, (A, D)))
    return out


def otimes2_via_phi3(u: OperatorTensor, v: OperatorTensor) -> OperatorTensor:
    """``phi_3[(u (x) 1)(1 (x) v)]`` built as an arity-3 tensor, then contracted."""
    u._check(v, arity=2)
    big = OperatorTensor(u.N, 3)
    for a, (A, B) in u.terms:
        for b, (C, D) in v.terms:
            big.terms.append((a * b, (A, mul(B, C), D)))
    return phi_contract(big)


def sharp_m(z: OperatorTensor, us: Sequence[OperatorTensor]) -> OperatorTensor:
    """``Z # m_k(U_1, ..., U_k)`` for arity-``k+1`` ``Z`` and arity-2 ``U_j``.

    On elementary tensors ``Z_0 (x) ... (x) Z_k`` and ``U_j = A_j (x) B_j``
    the result is ``Z_0 A_1 (x) B_1 Z_1 A_2 (x) ... (x) B_k Z_k``.
    """
    k = z.arity - 1
    if len(us) != k:
        raise ValidationError(f"arity-{z.arity} tensor needs {k} biprocesses, got {len(us)}")
    for u in us:
        if u.arity != 2 or u.N != z.N:
            raise ValidationError("each U_j must be an arity-2 tensor of matching dimension")
    # expand the product of sums one biprocess at a time
    partial = [(c, [f[0]], f) for c, f in z.terms]
    for j, u in enumerate(us, start=1):
        nxt = []
        for c, built, f in partial:
            for b, (A, B) in u.terms:
                head = built[:-1] + [mul(built[-1], A), mul(B, f[j])]
                nxt.append((c * b, head, f))
        partial = nxt
    return OperatorTensor(z.N, k + 1, [(c, tuple(built)) for c, built, _ in partial])


def inner(u: OperatorTensor, v: OperatorTensor) -> complex:
    """``<A (x) B, C (x) D> = phi[C* A] phi[B D*]``, linear in ``u``, antilinear in ``v``."""
    u._check(v, arity=2)
    N = u.N
    total = 0j
    for a, (A, B) in u.terms:
        for b, (C, D) in v.terms:
            total += a * np.conj(b) * trace_product(adjoint_factor(C), A, N) * trace_product(B, adjoint_factor(D), N)
    return total


def op_norm(u: OperatorTensor) -> float:
    """Norm of ``a -> u # a`` on ``N x N`` matrices with the Hilbert-Schmidt norm.

    Equals ``||A|| ||B||`` for an elementary tensor.  General sums are
    handled through :meth:`OperatorTensor.dense`, so keep ``N`` small.
    """
    if u.arity != 2:
        raise ValidationError("operator norm is defined for arity 2")
    if not u.terms:
        return 0.0
    if len(u.terms) == 1:
        c, (A, B) = u.terms[0]
        return abs(c) * factor_norm(A) * factor_norm(B)
    return float(np.linalg.norm(u.dense(), 2))


def distance(u: OperatorTensor, v: OperatorTensor) -> float:
    """Frobenius norm of ``dense(u) - dense(v)``."""
    u._check(v, arity=2)
    return float(np.linalg.norm(u.dense() - v.dense()))


def scale_of(u: OperatorTensor) -> float:
    """``sum |c| prod ||F||_F``; a crude size used for relative tolerances."""
    total = 0.0
    for c, f in u.terms:
        size = abs(c)
        for F in f:
            size *= np.sqrt(u.N) if F is ONE else float(np.linalg.norm(F))
        total += size
    return total

