"""Integrals of step functions against a free Levy process.

Run: python3 demos/03_scalar_integrals.py
"""
from fractions import Fraction

from freeito import StepFunction, bdg_check, catalog, integral_cumulants, moment_flow, moments_from_cumulants, mu_norm
from freeito.scalar import extrapolate_tail, mu_norm_tail

r = catalog("free_poisson")
f = StepFunction([0, 1, 2], [1, 3])

# law of int f dX: cumulants r_k int f^k
nu = integral_cumulants(f, r, 6)
exact = moments_from_cumulants(nu, 6)
print("cumulants:", [str(x) for x in nu.take(6)])
print("moments:  ", [str(x) for x in exact])

# the same moments from the moment ODE, integrated with RK4
flow = moment_flow(f, r, 6, 2.0, 10_000)
print("ODE:      ", [f"{y:.6f}" for y in flow])
print("max rel err:", max(abs(y - float(m)) / float(m) for y, m in zip(flow, exact)))

# mu-norms: for n = 2 this is r_2 ||f||_2^2 + r_1^2 (int f)^2 = 10 + 16
print("||f||_{2,mu}^2 =", mu_norm(f, r, 2) ** 2)
semi = catalog("semicircular")
tail = mu_norm_tail(StepFunction.indicator(), semi, 40)
print("semicircle tail, n = 2..40:", [round(v, 4) for _, v in tail[::4]])
print("extrapolated (diagnostic only):", round(extrapolate_tail(tail), 4), "limit is 2")

# BDG-type comparison for the diagonal measure Delta_2
for n in (2, 4, 6):
    lhs, rhs, ok = bdg_check(f, r, 2, n)
    print(f"n={n}: lhs {lhs:.4f} <= rhs {rhs:.4f}: {ok}")

g = StepFunction([0, Fraction(1, 2), 1], [Fraction(1, 2), 2])
print("triangle:", mu_norm(f + g, r, 6), "<=", mu_norm(f, r, 6) + mu_norm(g, r, 6))
