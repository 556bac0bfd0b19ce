"""Itô coefficients ``U_{m,n}`` of ``d(M^n)`` for ``dM = sum_j U_j # dDelta_j``.

Two independent constructions:

``ito_coeff_closed``
    ``U_{m,n} = sum_{k=1}^{m} (1/k!) phi_{k+1}[d^k(x^n)(M) # S(m, k)]`` with
    ``S(m, k)`` the sum over compositions ``i_1 + ... + i_k = m`` of
    ``m_k(U_{i_1}, ..., U_{i_k})``.
``ito_coeff_recursive``
    ``U_{m,1} = U_m`` and
    ``U_{m,n+1} = (M^n (x) 1) U_m + (1 (x) M) U_{m,n} + sum_{i+j=m} U_{i,n} (x)_2 U_j``.

Biprocesses with index beyond ``K = len(U)`` are zero, so ``U_{m,n} = 0``
for ``m > nK``; asking for such ``m`` is rejected.
"""

from __future__ import annotations

from math import factorial
from typing import Sequence

from .biprocess import ONE, OperatorTensor, from_polynomial, matrix_power, otimes2, phi_contract, sharp_m, _as_factor
from .errors import SizeError, ValidationError
from .tensor import partial_k, positive_compositions


def _validate(n, m, U):
    if not isinstance(n, int) or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    if not U:
        raise ValidationError("at least one biprocess U_1 is required")
    N = U[0].N
    for j, u in enumerate(U, start=1):
        if u.arity != 2 or u.N != N:
            raise SizeError(f"U_{j} must be an arity-2 tensor over {N}x{N} matrices")
    if m is not None and (not isinstance(m, int) or not 1 <= m <= n * len(U)):
        raise SizeError(f"m must lie in [1, nK] = [1, {n * len(U)}], got {m!r}")
    return N


def composition_sum(U: Sequence[OperatorTensor], m: int, k: int):
    """Index tuples of ``S(m, k)``: compositions of ``m`` into ``k`` parts in ``[1, K]``."""
    return list(positive_compositions(m, k, len(U)))


def ito_coeff_closed(n: int, m: int, U: Sequence[OperatorTensor], M) -> OperatorTensor:
    """``U_{m,n}`` from the closed formula."""
    N = _validate(n, m, U)
    M = _as_factor(M)
    out = OperatorTensor.zero(N)
    for k in range(1, min(m, n) + 1):
        derivative = partial_k({n: 1}, k)
        if derivative.is_zero():
            continue
        z = from_polynomial(derivative, M)
        for idx in composition_sum(U, m, k):
            term = phi_contract(sharp_m(z, [U[i - 1] for i in idx]))
            out = out + term * (1.0 / factorial(k))
    return out


def ito_coeff_recursive(n: int, U: Sequence[OperatorTensor], M) -> dict[int, OperatorTensor]:
    """The family ``{m: U_{m,n}}`` for ``m = 1..nK``, unrolled from ``U_{m,1} = U_m``."""
    N = _validate(n, None, U)
    M = _as_factor(M)
    K = len(U)
    zero = OperatorTensor.zero(N)

    def base(j):
        return U[j - 1] if 1 <= j <= K else zero

    right_M = OperatorTensor(N, 2, [(1.0, (ONE, M))])
    level = {j: base(j) for j in range(1, K + 1)}
    for l in range(1, n):
        left_power = OperatorTensor(N, 2, [(1.0, (matrix_power(M, l), ONE))])
        nxt = {}
        for m in range(1, (l + 1) * K + 1):
            total = left_power @ base(m) + right_M @ level.get(m, zero)
            for i in range(1, m):
                if i in level and 1 <= m - i <= K:
                    total = total + otimes2(level[i], U[m - i - 1])
            nxt[m] = total
        level = nxt
    return level
